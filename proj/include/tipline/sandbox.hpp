#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>
#include <sys/types.h>

#include "tipline/core.hpp"

namespace tipline::sandbox {

inline constexpr std::string_view kTruncationMarker = " …[truncated]";

struct ExecutionResult {
    enum class Status { ok, exception, timeout };
    Status status = Status::ok;
    std::string stdout_text;
    std::string stderr_text;
    std::chrono::milliseconds duration{0};
    bool truncated = false;
};

std::string_view to_string(ExecutionResult::Status s);

/// Formats a result the way the model sees it as a tool result.
std::string render_for_model(const ExecutionResult& r);

/// Truncates stdout then stderr so their combined length stays within
/// `limit` characters (plus the marker).
void truncate_output(ExecutionResult& r, std::size_t limit);

/// Anything that can run a code_execution tool call.
class CodeExecutor {
public:
    virtual ~CodeExecutor() = default;
    /// Throws SandboxError when the session is unusable.
    virtual ExecutionResult execute(std::string_view code) = 0;
};

struct SandboxOptions {
    std::string interpreter = "python3";
    std::filesystem::path runner_script;
    std::chrono::seconds timeout{60};
    std::size_t output_truncation = 8000;
    bool isolate_network = true;
};

/// One interpreter subprocess bound to one dataset, speaking newline
/// delimited JSON over its stdin/stdout. The dataset is copied into a
/// private scratch directory which is also the process working directory.
class SandboxSession final : public CodeExecutor {
public:
    enum class State { starting, ready, busy, dead };

    /// Launches the runner, loads the CSV as `df` and completes the ping
    /// handshake. Throws SandboxError on a missing interpreter or load failure.
    static std::unique_ptr<SandboxSession> start(const DatasetBundle& bundle, SandboxOptions options);

    ~SandboxSession() override;
    SandboxSession(const SandboxSession&) = delete;
    SandboxSession& operator=(const SandboxSession&) = delete;

    /// Runs code in the persistent namespace. On timeout the process group is
    /// killed and a fresh process is started with df reloaded.
    ExecutionResult execute(std::string_view code) override;

    /// Terminates the process group and removes the scratch directory.
    /// Safe to call repeatedly.
    void shutdown();

    State state() const noexcept { return state_; }
    const std::string& session_id() const noexcept { return session_id_; }
    pid_t pid() const noexcept { return pid_; }
    const std::filesystem::path& scratch_dir() const noexcept { return scratch_; }
    std::size_t loaded_rows() const noexcept { return rows_; }
    std::size_t loaded_cols() const noexcept { return cols_; }
    bool network_isolated() const noexcept { return net_isolated_; }

private:
    SandboxSession(DatasetBundle bundle, SandboxOptions options);

    void spawn();
    void handshake();
    void kill_process();
    nlohmann::json request(nlohmann::json req, std::chrono::milliseconds timeout, bool& timed_out);

    DatasetBundle bundle_;
    SandboxOptions options_;
    std::string session_id_;
    std::filesystem::path scratch_;
    std::filesystem::path dataset_copy_;
    State state_ = State::starting;
    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    int stderr_fd_ = -1;
    std::string pending_;
    std::string proc_stderr_;
    std::int64_t next_id_ = 1;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    bool net_isolated_ = false;
};

/// Defers process launch until the first execute call, so questions that
/// never run code never pay for (or depend on) an interpreter.
class LazySandbox final : public CodeExecutor {
public:
    LazySandbox(DatasetBundle bundle, SandboxOptions options);
    ExecutionResult execute(std::string_view code) override;
    bool started() const noexcept { return session_ != nullptr; }
    SandboxSession* session() noexcept { return session_.get(); }

private:
    DatasetBundle bundle_;
    SandboxOptions options_;
    std::unique_ptr<SandboxSession> session_;
};

}  // namespace tipline::sandbox
