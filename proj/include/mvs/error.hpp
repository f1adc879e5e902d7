#pragma once

#include <stdexcept>
#include <string>

namespace mvs {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace mvs
