#pragma once

#include <stdexcept>
#include <string>

namespace abscope {

/// Malformed user-supplied input (scene files, CLI arguments, data files).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input is well formed but cannot feed the requested pipeline stage.
class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a pipeline stage needs a layer the stack does not carry.
class MissingLayerError : public PreconditionError {
public:
    explicit MissingLayerError(const std::string& layer)
        : PreconditionError("missing layer: " + layer), layer_(layer) {}
    const std::string& layer() const { return layer_; }

private:
    std::string layer_;
};

}  // namespace abscope
