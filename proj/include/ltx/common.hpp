#pragma once
// Error taxonomy, seeded RNG substreams, and small text/file helpers shared
// by every component.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ltx {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape mismatch between tensor operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// NaN/Inf escaped a numeric kernel.
class NumericError : public Error {
public:
    using Error::Error;
};

// An API precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// Bad input data (corpus, sequence ids, file contents).
class InputError : public Error {
public:
    using Error::Error;
};

// Filesystem / serialization failure.
class IoError : public Error {
public:
    using Error::Error;
};

// Invalid run configuration or command usage.
class ConfigError : public Error {
public:
    using Error::Error;
};

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Named substreams derived from one master seed. Keeping the streams apart is
// what makes an AAE run with lambda=0 consume the same noise as the plain AE
// run: discriminator init and prior draws never touch the shared streams.
enum class Stream : uint64_t {
    InitModel = 1,
    InitDisc = 2,
    DataOrder = 3,
    TrainNoise = 4,
    DiscPrior = 5,
    Sampling = 6,
};

inline std::mt19937_64 make_stream(uint64_t seed, Stream which) {
    uint64_t s = seed ^ (0xa076'1d64'78bd'642full * static_cast<uint64_t>(which));
    uint64_t a = splitmix64(s);
    uint64_t b = splitmix64(s);
    std::seed_seq seq{static_cast<uint32_t>(a), static_cast<uint32_t>(a >> 32),
                      static_cast<uint32_t>(b), static_cast<uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

// Splits UTF-8 text into codepoint-sized chunks; an invalid byte becomes its
// own chunk so nothing is ever dropped.
std::vector<std::string> utf8_chars(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

uint64_t fnv1a64(std::string_view bytes);
std::string hex64(uint64_t v);

// printf-style float formatting (gcc 11 has no std::format).
std::string format_double(double v, int precision = 6);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// One sentence per line, UTF-8. Rejects tab and CR characters, drops empty
// lines (count reported via dropped_empty when non-null).
std::vector<std::string> load_sentences(const std::string& path, size_t* dropped_empty = nullptr);

// Thread cap for Eigen kernels and per-sentence metric workers. 0 = leave
// defaults alone.
void set_num_threads(int n);
int num_threads();

}  // namespace ltx
