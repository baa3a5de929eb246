#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tipline::retrieval {

inline constexpr std::size_t kChunkSize = 1200;
inline constexpr int kDefaultTopK = 4;

struct GuidelineDoc {
    std::string doc_id;
    std::string title;
    std::string body;
};

struct Chunk {
    std::string doc_id;
    int chunk_index = 0;
    std::string text;
    bool operator==(const Chunk&) const = default;
};

struct ScoredChunk {
    const Chunk* chunk = nullptr;
    double score = 0.0;
};

/// Lowercases and splits on anything that is not a letter or digit.
/// Bytes >= 0x80 count as letters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

/// Splits a body into chunks of at most kChunkSize characters: one per
/// paragraph, with oversized paragraphs packed sentence by sentence.
std::vector<std::string> split_into_chunks(std::string_view body, std::size_t max_chars = kChunkSize);

/// Collapses whitespace runs to a single space and trims.
std::string normalize_whitespace(std::string_view text);

/// Immutable TF-IDF index over the editor's guideline corpus.
class GuidelineIndex {
public:
    /// Throws Error on an empty corpus, a duplicate doc_id or an empty body.
    static GuidelineIndex ingest(std::vector<GuidelineDoc> docs);

    /// Top-k chunks by TF-IDF cosine similarity, ties broken by
    /// (doc_id, chunk_index). Chunks sharing no term with the query are
    /// never returned.
    std::vector<ScoredChunk> query(std::string_view text, int k = kDefaultTopK) const;

    /// Renders results as the editor's tool output, capped at k * kChunkSize characters.
    std::string format_results(const std::vector<ScoredChunk>& results, int k) const;

    const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
    const std::vector<GuidelineDoc>& docs() const noexcept { return docs_; }
    std::string reconstruct(std::string_view doc_id) const;

private:
    std::vector<GuidelineDoc> docs_;
    std::vector<Chunk> chunks_;
    std::map<std::string, double> idf_;
    std::vector<std::map<std::string, double>> weights_;
    std::vector<double> norms_;
};

/// Loads every `.md` file in a directory (sorted by name). doc_id is the file
/// stem; title is the first `# ` heading, falling back to the stem.
std::vector<GuidelineDoc> load_corpus(const std::filesystem::path& dir);

}  // namespace tipline::retrieval
