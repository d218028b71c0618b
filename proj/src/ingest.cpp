#include "phogad/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "phogad/csv.hpp"
#include "phogad/error.hpp"
#include "phogad/random.hpp"

namespace phogad {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

FlowSchema FlowSchema::from_json(const ordered_json& j) {
  FlowSchema s;
  try {
    s.key_a = j.at("key_a").get<std::string>();
    s.key_b = j.at("key_b").get<std::string>();
    s.label = j.at("label").get<std::string>();
    s.anomaly_values = j.value("anomaly_values", std::vector<std::string>{});
    s.numeric = j.value("numeric", std::vector<std::string>{});
    if (j.contains("categorical"))
      for (const auto& [col, vocab] : j.at("categorical").items())
        s.categorical.emplace_back(col, vocab.get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::bad_format, std::string("schema: ") + ex.what());
  }
  return s;
}

FlowSchema FlowSchema::load(const fs::path& path) {
  try {
    return from_json(ordered_json::parse(read_text(path)));
  } catch (const nlohmann::json::parse_error& ex) {
    throw Error(Errc::bad_format, path.string() + ": " + ex.what());
  }
}

ordered_json FlowSchema::to_json() const {
  ordered_json cat = ordered_json::object();
  for (const auto& [col, vocab] : categorical) cat[col] = vocab;
  return ordered_json{{"key_a", key_a},   {"key_b", key_b},     {"label", label},
                      {"anomaly_values", anomaly_values}, {"numeric", numeric}, {"categorical", cat}};
}

std::size_t FlowSchema::feature_count() const {
  std::size_t n = numeric.size();
  for (const auto& [col, vocab] : categorical) n += vocab.size();
  return n;
}

std::vector<FlowRecord> parse_flow_csv(const fs::path& path, const FlowSchema& schema) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw Error(Errc::empty_file, path.string() + " has no header");
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t c = 0; c < rows[0].size(); ++c) column.emplace(trim(rows[0][c]), c);
  auto col = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) throw Error(Errc::missing_column, "column '" + name + "' not in " + path.string());
    return it->second;
  };
  const std::size_t ka = col(schema.key_a), kb = col(schema.key_b), kl = col(schema.label);
  std::vector<std::size_t> numeric;
  for (const auto& name : schema.numeric) numeric.push_back(col(name));
  std::vector<std::size_t> categorical;
  for (const auto& [name, vocab] : schema.categorical) categorical.push_back(col(name));
  if (rows.size() < 2) throw Error(Errc::empty_file, path.string() + " has no data rows");

  const std::unordered_set<std::string> anomalous(schema.anomaly_values.begin(), schema.anomaly_values.end());
  auto cell = [&](std::size_t r, std::size_t c) -> const std::string& {
    if (c >= rows[r].size())
      throw Error(Errc::unparseable_cell, "row " + std::to_string(r) + " col " + trim(rows[0][c]) + " is missing");
    return rows[r][c];
  };

  std::vector<FlowRecord> records;
  records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    FlowRecord rec;
    rec.src_key = trim(cell(r, ka));
    rec.dst_key = trim(cell(r, kb));
    rec.label = anomalous.count(trim(cell(r, kl))) ? Label::anomalous : Label::normal;
    rec.features.reserve(schema.feature_count());
    for (std::size_t c : numeric) {
      auto v = csv::parse_double(cell(r, c));
      if (!v || !std::isfinite(*v))
        throw Error(Errc::unparseable_cell,
                    "row " + std::to_string(r) + " col " + trim(rows[0][c]) + ": '" + rows[r][c] + "'");
      rec.features.push_back(*v);
    }
    for (std::size_t i = 0; i < categorical.size(); ++i) {
      const auto value = trim(cell(r, categorical[i]));
      for (const auto& word : schema.categorical[i].second) rec.features.push_back(word == value ? 1.0 : 0.0);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

struct Email {
  std::string from;
  std::string to;
  std::string body;
};

std::string extract_address(std::string value) {
  value = trim(value);
  if (auto lt = value.find('<'); lt != std::string::npos) {
    auto gt = value.find('>', lt);
    if (gt != std::string::npos) return lower(trim(value.substr(lt + 1, gt - lt - 1)));
  }
  std::istringstream words(value);
  std::string w;
  while (words >> w)
    if (w.find('@') != std::string::npos) {
      w.erase(std::remove_if(w.begin(), w.end(), [](char c) { return c == '"' || c == '(' || c == ')'; }), w.end());
      return lower(w);
    }
  return lower(value);
}

std::string first_recipient(const std::string& value) {
  // Commas inside quoted display names do not separate recipients.
  bool quoted = false;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] == '"') quoted = !quoted;
    if (value[i] == ',' && !quoted) return extract_address(value.substr(0, i));
  }
  return extract_address(value);
}

Email parse_email(const std::string& text) {
  Email mail;
  std::size_t pos = 0;
  std::vector<std::pair<std::string, std::string>> headers;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = eol + 1;
    if (line.empty()) break;
    if ((line[0] == ' ' || line[0] == '\t') && !headers.empty()) {
      headers.back().second += " " + trim(line);
      continue;
    }
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    headers.emplace_back(lower(trim(line.substr(0, colon))), trim(line.substr(colon + 1)));
  }
  mail.body = pos < text.size() ? text.substr(pos) : std::string();
  for (const auto& [name, value] : headers) {
    if (name == "from" && mail.from.empty()) mail.from = extract_address(value);
    if (name == "to" && mail.to.empty()) mail.to = first_recipient(value);
  }
  return mail;
}

std::vector<fs::path> list_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::io_error, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(Errc::empty_file, dir.string() + " contains no files");
  return files;
}

}  // namespace

EmailCorpus parse_email_corpus(const fs::path& ham_dir, const fs::path& spam_dir, std::size_t vocab_size) {
  struct Doc {
    Email mail;
    std::vector<std::string> tokens;
    Label label;
  };
  std::vector<Doc> docs;
  for (auto [dir, label] : {std::pair{ham_dir, Label::normal}, std::pair{spam_dir, Label::anomalous}})
    for (const auto& file : list_files(dir)) {
      Email mail = parse_email(read_text(file));
      auto tokens = tokenize(mail.body);
      docs.push_back(Doc{std::move(mail), std::move(tokens), label});
    }

  std::map<std::string, std::size_t> doc_freq;
  for (const auto& d : docs) {
    std::vector<std::string> uniq = d.tokens;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto& t : uniq) ++doc_freq[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(doc_freq.begin(), doc_freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
  if (ranked.size() > vocab_size) ranked.resize(vocab_size);

  EmailCorpus corpus;
  std::unordered_map<std::string, std::size_t> slot;
  for (auto& [tok, df] : ranked) {
    slot.emplace(tok, corpus.vocabulary.size());
    corpus.vocabulary.push_back(tok);
  }
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto& d = docs[i];
    FlowRecord rec;
    rec.src_key = d.mail.from.empty() ? "unknown-sender-" + std::to_string(i) : d.mail.from;
    rec.dst_key = d.mail.to.empty() ? "unknown-recipient-" + std::to_string(i) : d.mail.to;
    rec.label = d.label;
    rec.features.assign(corpus.vocabulary.size(), 0.0);
    std::size_t hits = 0;
    for (const auto& t : d.tokens)
      if (auto it = slot.find(t); it != slot.end()) {
        rec.features[it->second] += 1.0;
        ++hits;
      }
    if (hits)
      for (auto& x : rec.features) x /= static_cast<double>(hits);
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

NormalizedRecords normalize_features(std::vector<FlowRecord> records) {
  NormalizedRecords out;
  if (records.empty()) return out;
  const std::size_t dim = records.front().features.size();
  out.ranges.assign(dim, FeatureRange{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
  for (const auto& r : records) {
    if (r.features.size() != dim) throw Error(Errc::inconsistent_dimension, "records differ in feature count");
    for (std::size_t k = 0; k < dim; ++k) {
      out.ranges[k].min = std::min(out.ranges[k].min, r.features[k]);
      out.ranges[k].max = std::max(out.ranges[k].max, r.features[k]);
    }
  }
  apply_normalization(records, out.ranges);
  out.records = std::move(records);
  return out;
}

void apply_normalization(std::vector<FlowRecord>& records, std::span<const FeatureRange> ranges) {
  for (auto& r : records) {
    if (r.features.size() != ranges.size()) throw Error(Errc::inconsistent_dimension, "record/range length mismatch");
    for (std::size_t k = 0; k < ranges.size(); ++k) {
      const double span = ranges[k].max - ranges[k].min;
      double x = span > 0.0 ? (r.features[k] - ranges[k].min) / span : 0.0;
      r.features[k] = std::clamp(x, 0.0, 1.0);
    }
  }
}

std::size_t max_anomalies_for(std::size_t normal_count, double target) {
  if (!(target > 0.0 && target <= 1.0))
    throw Error(Errc::invalid_argument, "anomaly proportion must lie in (0, 1]");
  if (target >= 1.0) return std::numeric_limits<std::size_t>::max();
  // The epsilon absorbs representation error, e.g. 0.1 * 90 / 0.9.
  return static_cast<std::size_t>(std::floor(target * static_cast<double>(normal_count) / (1.0 - target) + 1e-9));
}

std::vector<FlowRecord> downsample_anomalies(const std::vector<FlowRecord>& records, const SamplingSpec& spec) {
  std::vector<std::size_t> anomalies;
  std::size_t normal = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label == Label::anomalous)
      anomalies.push_back(i);
    else
      ++normal;
  }
  if (normal == 0) throw Error(Errc::invalid_argument, "no normal records to sample against");
  const std::size_t keep = max_anomalies_for(normal, spec.target_anomaly_proportion);
  if (keep == 0)
    throw Error(Errc::target_unreachable, "a single anomaly among " + std::to_string(normal) +
                                              " normal records already exceeds the target proportion");
  if (keep >= anomalies.size()) return records;

  Rng rng(spec.seed);
  std::vector<bool> kept(records.size(), true);
  for (std::size_t i : anomalies) kept[i] = false;
  for (std::size_t j : rng.sample_indices(anomalies.size(), keep)) kept[anomalies[j]] = true;
  std::vector<FlowRecord> out;
  out.reserve(normal + keep);
  for (std::size_t i = 0; i < records.size(); ++i)
    if (kept[i]) out.push_back(records[i]);
  return out;
}

double anomaly_proportion(std::span<const FlowRecord> records) {
  if (records.empty()) return 0.0;
  const auto n = std::count_if(records.begin(), records.end(), [](const FlowRecord& r) { return r.label == Label::anomalous; });
  return static_cast<double>(n) / static_cast<double>(records.size());
}

BehaviorGraph records_to_graph(const std::vector<FlowRecord>& records) {
  std::vector<NodeInput> nodes;
  std::unordered_set<std::string> seen;
  std::vector<EdgeInput> edges;
  edges.reserve(records.size());
  for (const auto& r : records) {
    for (const auto* key : {&r.src_key, &r.dst_key})
      if (seen.insert(*key).second) nodes.push_back(NodeInput{*key, {}});
    edges.push_back(EdgeInput{r.src_key, r.dst_key, r.features, r.label});
  }
  return node_attr_from_edges(BehaviorGraph::build(std::move(nodes), std::move(edges)));
}

}  // namespace phogad
