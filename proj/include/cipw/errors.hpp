#pragma once

#include <stdexcept>
#include <string>

namespace cipw {

// Exit codes surfaced by the CLI: 2 config, 3 data, 4 domain.
class Error : public std::runtime_error {
public:
    Error(int code, std::string kind, const std::string& what)
        : std::runtime_error(what), code_(code), kind_(std::move(kind)) {}
    int exit_code() const { return code_; }
    const std::string& kind() const { return kind_; }

private:
    int code_;
    std::string kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what, std::string kind = "config")
        : Error(2, std::move(kind), what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what, std::string kind = "data")
        : Error(3, std::move(kind), what) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& what, std::string kind = "domain")
        : Error(4, std::move(kind), what) {}
};

} // namespace cipw
