#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace subjtag {

/// Sink for line-oriented run logs; nullptr restores the default (stderr).
void set_log_sink(std::function<void(const std::string&)> sink);
void log_line(const std::string& line);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Splits on '\n'. A single trailing newline does not yield a final empty line;
// interior empty lines are preserved so parsers can report them.
std::vector<std::string> split_lines(std::string_view content);
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::string trim(std::string_view s);
std::string lower_ascii(std::string_view s);

// RFC 4180: quotes the field when it contains a comma, quote, CR or LF.
std::string csv_field(const std::string& s);

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset) {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= kFnvPrime;
    }
    return state;
}

// mt19937_64 with explicit rejection sampling; std::uniform_int_distribution
// is not bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform in [0, n). n must be > 0.
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t min = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t x = gen_();
            if (x >= min) return x % n;
        }
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 gen_;
};

}  // namespace subjtag
