#include "tipline/prompts.hpp"

#include <algorithm>
#include <cctype>

#include "tipline/core.hpp"
#include "tipline/error.hpp"

namespace tipline::prompts {

namespace {

struct Placeholder {
    std::size_t begin;
    std::size_t end;  // one past the closing braces
    std::string name;
};

bool is_name_char(char c) { return std::islower(static_cast<unsigned char>(c)) || c == '_' || std::isdigit(static_cast<unsigned char>(c)); }

std::vector<Placeholder> scan(std::string_view body) {
    std::vector<Placeholder> out;
    std::size_t pos = 0;
    while ((pos = body.find("{{", pos)) != std::string_view::npos) {
        std::size_t i = pos + 2;
        while (i < body.size() && body[i] == ' ') ++i;
        std::size_t name_start = i;
        while (i < body.size() && is_name_char(body[i])) ++i;
        std::size_t name_end = i;
        while (i < body.size() && body[i] == ' ') ++i;
        if (name_end > name_start && body.substr(i, 2) == "}}") {
            out.push_back({pos, i + 2, std::string(body.substr(name_start, name_end - name_start))});
            pos = i + 2;
        } else {
            pos += 2;
        }
    }
    return out;
}

}  // namespace

std::vector<std::string> placeholders(std::string_view body) {
    std::vector<std::string> names;
    for (auto& p : scan(body))
        if (std::find(names.begin(), names.end(), p.name) == names.end()) names.push_back(std::move(p.name));
    return names;
}

std::string render(std::string_view template_id, std::string_view body, const Bindings& bindings) {
    std::string out;
    std::size_t cursor = 0;
    for (const auto& p : scan(body)) {
        auto it = bindings.find(p.name);
        if (it == bindings.end()) throw MissingBindingError(std::string(template_id), p.name);
        out.append(body.substr(cursor, p.begin - cursor));
        out += it->second;
        cursor = p.end;
    }
    out.append(body.substr(cursor));
    return out;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("prompt directory not found: " + dir.string());
    PromptLibrary lib;
    auto load_dir = [&](const std::filesystem::path& d, const std::string& prefix) {
        if (!std::filesystem::is_directory(d)) return;
        for (const auto& e : std::filesystem::directory_iterator(d))
            if (e.is_regular_file() && e.path().extension() == ".txt")
                lib.set(prefix + e.path().stem().string(), read_text_file(e.path()));
    };
    load_dir(dir, "");
    load_dir(dir / "system", "system/");

    std::string missing;
    for (const auto* ids : {&step_template_ids(), &system_template_ids()})
        for (const auto& id : *ids)
            if (!lib.contains(id)) missing += (missing.empty() ? "" : ", ") + id;
    if (!missing.empty()) throw ConfigError("prompt directory " + dir.string() + " is missing: " + missing);
    return lib;
}

void PromptLibrary::set(std::string id, std::string body) { templates_[std::move(id)] = std::move(body); }

bool PromptLibrary::contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

const std::string& PromptLibrary::body(std::string_view id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw UnknownTemplateError("unknown prompt template '" + std::string(id) + "'");
    return it->second;
}

std::vector<std::string> PromptLibrary::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : templates_) out.push_back(id);
    return out;
}

std::string PromptLibrary::render(std::string_view id, const Bindings& bindings) const {
    return prompts::render(id, body(id), bindings);
}

}  // namespace tipline::prompts
