#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "pacmetric/scst.hpp"

namespace pacmetric::scst {

namespace {

bool is_punct(unsigned char c) { return std::ispunct(c) != 0; }

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

void GrammarConfig::validate() const {
    if (stoplist.empty()) throw std::invalid_argument("GrammarConfig: empty stoplist");
    if (max_n == 0) throw std::invalid_argument("GrammarConfig: max_n must be >= 1");
}

std::set<std::string> load_stoplist(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open stoplist " + path.string());
    std::set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string w;
        while (ss >> w) words.insert(lower(w));
    }
    if (words.empty()) throw std::runtime_error("stoplist " + path.string() + " is empty");
    return words;
}

std::vector<std::string> tokenize_caption(const std::string& caption) {
    std::vector<std::string> out;
    std::istringstream ss(caption);
    std::string w;
    while (ss >> w) {
        std::size_t b = 0, e = w.size();
        while (b < e && is_punct(static_cast<unsigned char>(w[b]))) ++b;
        while (e > b && is_punct(static_cast<unsigned char>(w[e - 1]))) --e;
        if (e > b) out.push_back(lower(w.substr(b, e - b)));
    }
    return out;
}

double rep_n(std::span<const std::vector<std::string>> captions, std::size_t n) {
    if (n == 0) throw std::invalid_argument("rep_n: n must be >= 1");
    if (captions.empty()) return 0.0;
    double total = 0.0;
    for (const auto& c : captions) {
        if (c.size() < n) continue;
        std::map<std::vector<std::string>, std::size_t> grams;
        const std::size_t count = c.size() - n + 1;
        for (std::size_t i = 0; i < count; ++i)
            ++grams[std::vector<std::string>(c.begin() + static_cast<std::ptrdiff_t>(i),
                                             c.begin() + static_cast<std::ptrdiff_t>(i + n))];
        total += static_cast<double>(count - grams.size());
    }
    return total / static_cast<double>(captions.size());
}

EndingReport pct_incorrect_endings(std::span<const std::string> captions, const GrammarConfig& cfg) {
    cfg.validate();
    EndingReport report;
    if (captions.empty()) return report;
    std::size_t bad = 0;
    for (const auto& c : captions) {
        const auto words = tokenize_caption(c);
        if (words.empty()) {
            ++report.empty_captions;
            ++bad;
            continue;
        }
        bad += cfg.stoplist.contains(words.back());
    }
    report.percent = 100.0 * static_cast<double>(bad) / static_cast<double>(captions.size());
    return report;
}

}  // namespace pacmetric::scst
