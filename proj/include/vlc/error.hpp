// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vlc {

enum class ErrorKind {
    invalid_parameter,
    invalid_state,
    invalid_input,
    capacity_exceeded,
    invalid_config,
};

constexpr std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_state: return "invalid-state";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::capacity_exceeded: return "capacity-exceeded";
    case ErrorKind::invalid_config: return "invalid-config";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Config errors carry the JSON pointer of the offending value.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(ErrorKind::invalid_config, what), path_(std::move(path))
    {
    }

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what)
{
    if (!cond)
        throw Error(kind, what);
}

} // namespace vlc
