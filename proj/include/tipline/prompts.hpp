#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tipline::prompts {

using Bindings = std::map<std::string, std::string>;

/// Template ids for each prompt box of the pipeline, one file each.
inline const std::vector<std::string>& step_template_ids() {
    static const std::vector<std::string> ids{
        "step1_questions",       "step2_plan",          "step2_editor_review",  "step2_revise",
        "step3_execute",         "step3_summarize",     "step3_reporter_feedback", "step3_followup",
        "step3_editor_review",   "step3_editor_revise", "step3_final_summary",  "step4_compile",
        "baseline_answer"};
    return ids;
}

/// Role system prompts, stored under `system/`.
inline const std::vector<std::string>& system_template_ids() {
    static const std::vector<std::string> ids{"system/analyst", "system/reporter", "system/editor"};
    return ids;
}

/// Placeholder names (without braces) in order of first appearance.
std::vector<std::string> placeholders(std::string_view body);

/// Substitutes every {{name}} in one pass. Bound values are not rescanned.
/// Throws MissingBindingError naming the first unbound placeholder.
std::string render(std::string_view template_id, std::string_view body, const Bindings& bindings);

class PromptLibrary {
public:
    /// Loads `<dir>/*.txt` and `<dir>/system/*.txt`; throws ConfigError if
    /// any required template is missing.
    static PromptLibrary load(const std::filesystem::path& dir);

    void set(std::string id, std::string body);
    bool contains(std::string_view id) const;
    const std::string& body(std::string_view id) const;
    std::vector<std::string> ids() const;

    /// Throws UnknownTemplateError or MissingBindingError.
    std::string render(std::string_view id, const Bindings& bindings) const;

private:
    std::map<std::string, std::string, std::less<>> templates_;
};

}  // namespace tipline::prompts
