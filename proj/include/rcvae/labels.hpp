#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rcvae/errors.hpp"
#include "rcvae/matrix.hpp"

namespace rcvae {

// Condition of one sample: the battery's end of life and the cycle count
// already completed. Remaining life is always derived (eol - ecl), never
// stored. String form is "EOL_ECL", no padding.
struct LabelKey {
    std::int64_t eol = 0;
    std::int64_t ecl = 0;

    std::string str() const { return std::to_string(eol) + "_" + std::to_string(ecl); }
    bool operator==(const LabelKey&) const = default;
};

// Throws ParseError on anything but "<digits>_<digits>" with
// 1 <= ecl <= eol.
LabelKey parse_label(const std::string& s);

// Distinct condition labels in first-occurrence order; index <-> key is a
// bijection over 0..N-1. Immutable once built.
class LabelVocab {
  public:
    LabelVocab() = default;

    static LabelVocab build(const std::vector<LabelKey>& train_labels);

    std::size_t size() const { return keys_.size(); }
    const LabelKey& at(std::size_t idx) const { return keys_[idx]; }
    const std::vector<LabelKey>& keys() const { return keys_; }

    std::optional<std::size_t> find(const LabelKey& key) const;

    // LookupError if absent; callers with possibly-unseen labels go
    // through match_similar first.
    std::size_t index_of(const LabelKey& key) const;

  private:
    std::vector<LabelKey> keys_;
    std::unordered_map<std::string, std::size_t> index_;
};

// weight * |eol1 - eol2| + (1 - weight) * |ecl1 - ecl2|.
double label_distance(const LabelKey& a, const LabelKey& b, double weight);

// Index of the vocab entry closest to query; ties break toward the lowest
// vocab index. Vocab must be nonempty.
std::size_t match_similar(const LabelVocab& vocab, const LabelKey& query, double weight);

// Row lookup into the N x D embedding table.
std::vector<double> embed_row(const Matrix& table, std::size_t index);

}  // namespace rcvae
