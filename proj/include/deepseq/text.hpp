#ifndef DEEPSEQ_TEXT_HPP
#define DEEPSEQ_TEXT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace deepseq::text {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
/// Fixed-point with `decimals` digits; NaN prints as "undefined".
std::string format_fixed(double v, int decimals);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

/// 64-bit FNV-1a, printed as 16 hex digits by hex_digest.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex_digest(std::uint64_t h);

/// splitmix64 finalizer; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace deepseq::text

#endif  // DEEPSEQ_TEXT_HPP
