#pragma once

#include <stdexcept>
#include <string>

namespace dwsim {

/// Bad input: malformed config, out-of-range parameter, wrong basis.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed its own accuracy contract.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dwsim
