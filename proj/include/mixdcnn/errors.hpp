#ifndef MIXDCNN_ERRORS_HPP
#define MIXDCNN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mixdcnn {

// Malformed or corrupt on-disk data: bad magic, truncation, CRC mismatch.
// The CLI maps this family to exit code 3.
class CorruptFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Recognized container with an unsupported version field.
class VersionError : public CorruptFileError {
public:
    using CorruptFileError::CorruptFileError;
};

// key = value config problems; carries key name and line number in the message.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient during training. Aborts the run.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mixdcnn

#endif
