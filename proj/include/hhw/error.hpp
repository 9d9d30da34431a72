#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hhw {

// Base of every exception thrown by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class domain_error : public error {
public:
    using error::error;
};

class overflow_error : public error {
public:
    using error::error;
};

// A series or quadrature did not reach the requested tolerance.
class convergence_error : public error {
public:
    using error::error;
};

class dimension_error : public error {
public:
    using error::error;
};

// A configured resource limit (e.g. fractional history memory) would be exceeded.
class resource_error : public error {
public:
    using error::error;
};

// A modelling hypothesis (e.g. a0 > k/beta) does not hold for the given parameters.
class hypothesis_error : public error {
public:
    using error::error;
};

// Invalid user configuration. `field()` names the offending key.
class config_error : public error {
public:
    config_error(std::string field, const std::string& what)
        : error(field.empty() ? what : field + ": " + what), field_(std::move(field)), reason_(what) {}

    const std::string& field() const noexcept { return field_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string field_;
    std::string reason_;
};

// Integration aborted. Carries the last finite state and its time.
class integration_error : public error {
public:
    integration_error(const std::string& what, double time, std::vector<double> last_state)
        : error(what), time_(time), last_state_(std::move(last_state)) {}

    double time() const noexcept { return time_; }
    const std::vector<double>& last_state() const noexcept { return last_state_; }

private:
    double time_;
    std::vector<double> last_state_;
};

} // namespace hhw
