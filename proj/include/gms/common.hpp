#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gms {

// Error taxonomy. CLI maps user-input problems (usage, validation, config,
// parse, archive format) to exit 1 and everything else to exit 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : Error { using Error::Error; };    // shape/axis mismatch
struct ConfigError : Error { using Error::Error; };       // invalid configuration value
struct UsageError : Error { using Error::Error; };        // API misuse (non-scalar loss, empty dataset)
struct StateError : Error { using Error::Error; };        // double backward, diverged run
struct ValidationError : Error { using Error::Error; };   // data values out of contract
struct ParseError : Error { using Error::Error; };        // malformed input file
struct FormatError : Error { using Error::Error; };       // archive magic/header mismatch
struct VersionError : Error { using Error::Error; };      // archive version too new
struct CorruptionError : Error { using Error::Error; };   // archive bounds/overlap/truncation
struct IoError : Error { using Error::Error; };           // filesystem failure
struct ContractError : Error { using Error::Error; };     // frozen-weight / hash contract violation

inline std::string strfmt(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    char buf[1024];
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return std::string(buf);
}

using Shape = std::vector<int>;

inline size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace gms
