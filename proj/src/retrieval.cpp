#include "tipline/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "tipline/core.hpp"
#include "tipline/error.hpp"

namespace tipline::retrieval {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

bool is_blank_line(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

std::vector<std::string> paragraphs(std::string_view body) {
    std::vector<std::string> out;
    std::string current;
    std::istringstream in{std::string(body)};
    std::string line;
    while (std::getline(in, line)) {
        if (is_blank_line(line)) {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
            continue;
        }
        if (!current.empty()) current += '\n';
        current += line;
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

// Sentence pieces keep their trailing whitespace so nothing but whitespace
// is ever lost when chunks are joined back together.
std::vector<std::string_view> sentences(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && i + 1 < text.size() &&
            std::isspace(static_cast<unsigned char>(text[i + 1]))) {
            std::size_t end = i + 1;
            while (end < text.size() && std::isspace(static_cast<unsigned char>(text[end]))) ++end;
            out.push_back(text.substr(start, end - start));
            start = end;
            i = end - 1;
        }
    }
    if (start < text.size()) out.push_back(text.substr(start));
    return out;
}

// Cuts an oversized piece at the last whitespace before the limit.
std::vector<std::string> hard_split(std::string_view piece, std::size_t max_chars) {
    std::vector<std::string> out;
    while (piece.size() > max_chars) {
        std::size_t cut = max_chars;
        for (std::size_t i = max_chars; i > 0; --i)
            if (std::isspace(static_cast<unsigned char>(piece[i - 1]))) {
                cut = i;
                break;
            }
        out.emplace_back(piece.substr(0, cut));
        piece.remove_prefix(cut);
    }
    if (!piece.empty()) out.emplace_back(piece);
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            cur += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += static_cast<char>(c);
    }
    return out;
}

std::vector<std::string> split_into_chunks(std::string_view body, std::size_t max_chars) {
    std::vector<std::string> chunks;
    for (const auto& para : paragraphs(body)) {
        if (para.size() <= max_chars) {
            chunks.push_back(trim(para));
            continue;
        }
        std::string current;
        for (std::string_view sentence : sentences(para)) {
            for (const auto& piece : hard_split(sentence, max_chars)) {
                if (current.size() + piece.size() > max_chars) {
                    chunks.push_back(trim(current));
                    current.clear();
                }
                current += piece;
            }
        }
        if (!trim(current).empty()) chunks.push_back(trim(current));
    }
    return chunks;
}

GuidelineIndex GuidelineIndex::ingest(std::vector<GuidelineDoc> docs) {
    if (docs.empty()) throw Error("guideline corpus is empty");
    std::set<std::string> ids;
    for (const auto& d : docs) {
        if (!ids.insert(d.doc_id).second) throw Error("duplicate guideline doc_id '" + d.doc_id + "'");
        if (normalize_whitespace(d.body).empty()) throw Error("guideline '" + d.doc_id + "' has an empty body");
    }

    GuidelineIndex index;
    index.docs_ = std::move(docs);
    for (const auto& d : index.docs_) {
        int i = 0;
        for (auto& text : split_into_chunks(d.body)) index.chunks_.push_back(Chunk{d.doc_id, i++, std::move(text)});
    }

    std::vector<std::map<std::string, double>> tf(index.chunks_.size());
    std::map<std::string, int> df;
    for (std::size_t c = 0; c < index.chunks_.size(); ++c) {
        for (auto& tok : tokenize(index.chunks_[c].text)) tf[c][tok] += 1.0;
        for (const auto& [term, _] : tf[c]) ++df[term];
    }
    const double n = static_cast<double>(index.chunks_.size());
    for (const auto& [term, count] : df) index.idf_[term] = std::log((1.0 + n) / (1.0 + count)) + 1.0;

    index.weights_.resize(index.chunks_.size());
    index.norms_.resize(index.chunks_.size());
    for (std::size_t c = 0; c < tf.size(); ++c) {
        double sq = 0.0;
        for (const auto& [term, count] : tf[c]) {
            double w = count * index.idf_[term];
            index.weights_[c][term] = w;
            sq += w * w;
        }
        index.norms_[c] = std::sqrt(sq);
    }
    return index;
}

std::vector<ScoredChunk> GuidelineIndex::query(std::string_view text, int k) const {
    if (k < 1) throw Error("query k must be >= 1");
    std::map<std::string, double> q;
    for (auto& tok : tokenize(text))
        if (idf_.count(tok)) q[tok] += 1.0;
    double qnorm = 0.0;
    for (auto& [term, w] : q) {
        w *= idf_.at(term);
        qnorm += w * w;
    }
    qnorm = std::sqrt(qnorm);

    std::vector<ScoredChunk> scored;
    if (q.empty()) return scored;
    for (std::size_t c = 0; c < chunks_.size(); ++c) {
        double dot = 0.0;
        for (const auto& [term, w] : q)
            if (auto it = weights_[c].find(term); it != weights_[c].end()) dot += w * it->second;
        if (dot > 0.0) scored.push_back({&chunks_[c], dot / (qnorm * norms_[c])});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.chunk->doc_id != b.chunk->doc_id) return a.chunk->doc_id < b.chunk->doc_id;
        return a.chunk->chunk_index < b.chunk->chunk_index;
    });
    if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
    return scored;
}

std::string GuidelineIndex::format_results(const std::vector<ScoredChunk>& results, int k) const {
    if (results.empty()) return "No guideline passages matched the query.";
    std::string out;
    for (const auto& r : results) {
        if (!out.empty()) out += "\n\n";
        out += "[" + r.chunk->doc_id + "#" + std::to_string(r.chunk->chunk_index) + "]\n" + r.chunk->text;
    }
    const std::size_t cap = static_cast<std::size_t>(std::max(k, 1)) * kChunkSize;
    if (out.size() > cap) out.resize(cap);
    return out;
}

std::string GuidelineIndex::reconstruct(std::string_view doc_id) const {
    std::string out;
    for (const auto& c : chunks_) {
        if (c.doc_id != doc_id) continue;
        if (!out.empty()) out += ' ';
        out += c.text;
    }
    return normalize_whitespace(out);
}

std::vector<GuidelineDoc> load_corpus(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("knowledge directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".md") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::vector<GuidelineDoc> docs;
    for (const auto& f : files) {
        GuidelineDoc d;
        d.doc_id = f.stem().string();
        d.body = read_text_file(f);
        d.title = d.doc_id;
        std::istringstream in(d.body);
        for (std::string line; std::getline(in, line);)
            if (line.rfind("# ", 0) == 0) {
                d.title = trim(line.substr(2));
                break;
            }
        docs.push_back(std::move(d));
    }
    return docs;
}

}  // namespace tipline::retrieval
