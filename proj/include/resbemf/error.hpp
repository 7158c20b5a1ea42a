#pragma once

#include <stdexcept>
#include <string>

namespace resbemf {

// Malformed or inconsistent input data (files, configs, arguments).
class InputError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// A user or item that has no learned factors.
class ColdStartError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Training produced non-finite parameters or otherwise failed.
class TrainingError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace resbemf
