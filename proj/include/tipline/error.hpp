#pragma once

#include <stdexcept>
#include <string>

namespace tipline {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dataset bundle problems.
class DatasetError : public Error {
public:
    using Error::Error;
};
class MalformedCsvError : public DatasetError {
public:
    using DatasetError::DatasetError;
};
class MissingDescriptionError : public DatasetError {
public:
    using DatasetError::DatasetError;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};
class UnknownTemplateError : public TemplateError {
public:
    using TemplateError::TemplateError;
};
class MissingBindingError : public TemplateError {
public:
    MissingBindingError(const std::string& template_id, std::string placeholder)
        : TemplateError("template '" + template_id + "' has no binding for {{" + placeholder + "}}"),
          placeholder_(std::move(placeholder)) {}
    const std::string& placeholder() const noexcept { return placeholder_; }

private:
    std::string placeholder_;
};

// Agent replies that do not follow the requested format.
class ReplyFormatError : public Error {
public:
    using Error::Error;
};

// Everything the llm gateway can raise.
class BackendError : public Error {
public:
    using Error::Error;
    virtual bool retryable() const noexcept { return false; }
};
class TransportError : public BackendError {
public:
    using BackendError::BackendError;
    bool retryable() const noexcept override { return true; }
};
class RateLimitError : public BackendError {
public:
    using BackendError::BackendError;
    bool retryable() const noexcept override { return true; }
};
class ContextOverflowError : public BackendError {
public:
    using BackendError::BackendError;
};
class UnmatchedCallError : public BackendError {
public:
    using BackendError::BackendError;
};
class ReplayMissError : public BackendError {
public:
    using BackendError::BackendError;
};

class SandboxError : public Error {
public:
    using Error::Error;
};

class RunawayToolLoopError : public Error {
public:
    using Error::Error;
};

class PipelineError : public Error {
public:
    using Error::Error;
};

class EvaluationError : public Error {
public:
    using Error::Error;
};

}  // namespace tipline
