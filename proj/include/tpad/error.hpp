#pragma once

#include <stdexcept>
#include <string>

namespace tpad {

// Error kinds map 1:1 onto CLI exit codes.
enum class ErrorKind { config = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_config(const std::string& msg) { throw Error(ErrorKind::config, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(ErrorKind::numeric, msg); }

inline void check_config(bool ok, const std::string& msg) {
    if (!ok) fail_config(msg);
}
inline void check_data(bool ok, const std::string& msg) {
    if (!ok) fail_data(msg);
}
inline void check_numeric(bool ok, const std::string& msg) {
    if (!ok) fail_numeric(msg);
}

} // namespace tpad
