#include "rcvae/labels.hpp"

#include <cmath>
#include <cstdlib>

namespace rcvae {

LabelKey parse_label(const std::string& s) {
    const auto sep = s.find('_');
    if (sep == std::string::npos || sep == 0 || sep + 1 >= s.size()) {
        throw ParseError("label '" + s + "': expected \"EOL_ECL\"");
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i == sep) continue;
        if (s[i] < '0' || s[i] > '9') {
            throw ParseError("label '" + s + "': non-digit at position " + std::to_string(i));
        }
    }
    LabelKey key;
    key.eol = std::strtoll(s.substr(0, sep).c_str(), nullptr, 10);
    key.ecl = std::strtoll(s.substr(sep + 1).c_str(), nullptr, 10);
    if (key.eol <= 0 || key.ecl <= 0) {
        throw ParseError("label '" + s + "': EOL and ECL must be positive");
    }
    if (key.ecl > key.eol) {
        throw ParseError("label '" + s + "': ECL exceeds EOL");
    }
    return key;
}

LabelVocab LabelVocab::build(const std::vector<LabelKey>& train_labels) {
    if (train_labels.empty()) throw DataError("vocab: no labels");
    LabelVocab v;
    for (const LabelKey& key : train_labels) {
        const std::string s = key.str();
        if (v.index_.find(s) == v.index_.end()) {
            v.index_.emplace(s, v.keys_.size());
            v.keys_.push_back(key);
        }
    }
    return v;
}

std::optional<std::size_t> LabelVocab::find(const LabelKey& key) const {
    auto it = index_.find(key.str());
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t LabelVocab::index_of(const LabelKey& key) const {
    auto idx = find(key);
    if (!idx) throw LookupError("label '" + key.str() + "' not in vocabulary");
    return *idx;
}

double label_distance(const LabelKey& a, const LabelKey& b, double weight) {
    return weight * std::abs(static_cast<double>(a.eol - b.eol)) +
           (1.0 - weight) * std::abs(static_cast<double>(a.ecl - b.ecl));
}

std::size_t match_similar(const LabelVocab& vocab, const LabelKey& query, double weight) {
    if (vocab.size() == 0) throw StateError("match_similar: empty vocabulary");
    std::size_t best = 0;
    double best_d = label_distance(vocab.at(0), query, weight);
    for (std::size_t i = 1; i < vocab.size(); ++i) {
        const double d = label_distance(vocab.at(i), query, weight);
        if (d < best_d) {  // strict: ties keep the lowest index
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::vector<double> embed_row(const Matrix& table, std::size_t index) {
    if (index >= table.rows) {
        throw LookupError("embedding row " + std::to_string(index) + " of " +
                          std::to_string(table.rows));
    }
    std::vector<double> row(table.cols);
    for (std::size_t c = 0; c < table.cols; ++c) row[c] = table.at(index, c);
    return row;
}

}  // namespace rcvae
