#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace vts {

using Bytes = std::vector<std::uint8_t>;

std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view text);
std::string base64_encode(std::span<const std::uint8_t> data);

// Stable 64-bit seed from a base seed and a tuple of string parts.
// FNV-1a over length-prefixed parts, finished with a SplitMix64 round, so the
// value does not depend on the standard library's hash implementation.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> parts);

// Uniform integer in [0, n) by rejection; mt19937_64 output is fully specified
// by the standard whereas uniform_int_distribution is not.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

Bytes read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over the target.
void write_atomic(const std::filesystem::path& path, std::string_view contents);
void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> contents);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::ordered_json>& lines);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::string slugify(std::string_view s);

// Formats a double with the given significant digits using %g and strips
// nothing else; used wherever output bytes must be reproducible.
std::string format_sig(double value, int digits);

// Runs body(i) for i in [0, n) on up to `threads` workers. The first exception
// thrown stops the remaining work and is rethrown after all workers join.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace vts
