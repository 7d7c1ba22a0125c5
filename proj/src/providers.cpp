// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include "plugblend/providers.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace plugblend {

using nlohmann::json;

double ClassConditionalModel::prior(std::string_view code) const {
  require_code(code);
  return 1.0 / static_cast<double>(codes().size());
}

bool ClassConditionalModel::has_code(std::string_view code) const {
  for (const auto& c : codes()) {
    if (c == code) return true;
  }
  return false;
}

void ClassConditionalModel::require_code(std::string_view code) const {
  if (!has_code(code)) {
    throw Error(Errc::UnknownControlCode, "guide does not advertise control code '" + std::string(code) + "'");
  }
}

void check_compatible(const LanguageModel& base, const ClassConditionalModel& guide) {
  if (base.vocab_size() != guide.vocab_size()) {
    throw Error(Errc::VocabMismatch, "base vocabulary size " + std::to_string(base.vocab_size()) +
                                         " differs from guide vocabulary size " +
                                         std::to_string(guide.vocab_size()));
  }
}

double sequence_logprob(const LanguageModel& model, std::span<const TokenId> tokens,
                        std::span<const TokenId> context) {
  if (tokens.empty()) throw Error(Errc::InsufficientData, "cannot score an empty token sequence");
  std::vector<TokenId> history(context.begin(), context.end());
  history.reserve(context.size() + tokens.size());
  double total = 0.0;
  for (TokenId tok : tokens) {
    const auto logits = model.next_logits(history);
    if (tok < 0 || static_cast<std::size_t>(tok) >= logits.size()) {
      throw Error(Errc::VocabMismatch, "token id " + std::to_string(tok) + " outside vocabulary");
    }
    total += log_softmax(logits)[static_cast<std::size_t>(tok)];
    history.push_back(tok);
  }
  return total;
}

namespace {

bool is_punct_token(std::string_view word) {
  if (word.empty()) return false;
  for (char c : word) {
    if (std::string_view(".,!?;:").find(c) == std::string_view::npos) return false;
  }
  return true;
}

}  // namespace

std::vector<TokenId> whitespace_tokenize(const Vocabulary& vocab, std::string_view text) {
  std::vector<TokenId> out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    if (auto id = vocab.find(word)) {
      out.push_back(*id);
      continue;
    }
    // "home." -> "home" "." when the punctuation is a token of its own.
    std::size_t cut = word.size();
    while (cut > 0 && is_punct_token(std::string_view(word).substr(cut - 1, 1))) --cut;
    const auto core = std::string_view(word).substr(0, cut);
    if (cut == word.size() || core.empty()) {
      out.push_back(Vocabulary::kUnknown);
      continue;
    }
    out.push_back(vocab.find(core).value_or(Vocabulary::kUnknown));
    for (std::size_t i = cut; i < word.size(); ++i) {
      out.push_back(vocab.find(std::string_view(word).substr(i, 1)).value_or(Vocabulary::kUnknown));
    }
  }
  return out;
}

std::string whitespace_detokenize(const Vocabulary& vocab, std::span<const TokenId> tokens) {
  std::string out;
  for (TokenId t : tokens) {
    const auto& piece = vocab.token(t);
    if (!out.empty() && !is_punct_token(piece)) out += ' ';
    out += piece;
  }
  return out;
}

// ---------------------------------------------------------------------------
// TableLM

namespace {

constexpr double kRowTolerance = 1e-9;

void validate_row(const ProbVector& row, std::size_t vocab_size, const std::string& where,
                  const std::string& key) {
  if (row.size() != vocab_size) {
    throw Error(Errc::ModelFileInvalid, where + ": row '" + key + "' has " + std::to_string(row.size()) +
                                            " entries, expected " + std::to_string(vocab_size));
  }
  double sum = 0.0;
  for (double p : row) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(Errc::ModelFileInvalid, where + ": row '" + key + "' has a negative or non-finite entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowTolerance) {
    std::ostringstream msg;
    msg.precision(12);
    msg << where << ": row '" << key << "' sums to " << sum << ", expected 1";
    throw Error(Errc::ModelFileInvalid, msg.str());
  }
}

LogitVector to_logits(const ProbVector& probs) {
  LogitVector out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = probs[i] > 0.0 ? std::max(std::log(probs[i]), TableLM::kLogFloor) : TableLM::kLogFloor;
  }
  return out;
}

std::string key_string(const std::vector<TokenId>& key) {
  std::string out;
  for (TokenId t : key) {
    if (!out.empty()) out += ' ';
    out += std::to_string(t);
  }
  return out;
}

std::vector<TokenId> parse_key(const std::string& key, const std::string& where) {
  std::vector<TokenId> out;
  std::istringstream in(key);
  std::string part;
  while (in >> part) {
    std::size_t used = 0;
    long value = -1;
    try {
      value = std::stol(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != part.size() || value < 0) {
      throw Error(Errc::ModelFileInvalid, where + ": table key '" + key + "' is not a list of token ids");
    }
    out.push_back(static_cast<TokenId>(value));
  }
  return out;
}

ProbVector read_row(const json& value, const std::string& where, const std::string& key) {
  if (!value.is_array()) {
    throw Error(Errc::ModelFileInvalid, where + ": row '" + key + "' must be an array of numbers");
  }
  ProbVector row;
  row.reserve(value.size());
  for (const auto& v : value) {
    if (!v.is_number()) {
      throw Error(Errc::ModelFileInvalid, where + ": row '" + key + "' contains a non-numeric entry");
    }
    row.push_back(v.get<double>());
  }
  return row;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ModelFileInvalid, path.string() + ": cannot open model file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ModelFileInvalid, path.string() + ": " + e.what());
  }
}

std::shared_ptr<const Vocabulary> read_vocab(const json& doc, const std::string& where) {
  if (!doc.contains("vocab") || !doc["vocab"].is_array()) {
    throw Error(Errc::ModelFileInvalid, where + ": missing 'vocab' array");
  }
  std::vector<std::string> tokens;
  for (const auto& t : doc["vocab"]) {
    if (!t.is_string()) throw Error(Errc::ModelFileInvalid, where + ": 'vocab' entries must be strings");
    tokens.push_back(t.get<std::string>());
  }
  try {
    return std::make_shared<const Vocabulary>(std::move(tokens));
  } catch (const Error& e) {
    throw Error(Errc::ModelFileInvalid, where + ": " + e.what());
  }
}

}  // namespace

TableLM::TableLM(std::shared_ptr<const Vocabulary> vocab, int order, ProbVector backoff,
                 std::map<std::vector<TokenId>, ProbVector> table)
    : vocab_(std::move(vocab)), order_(order), backoff_(std::move(backoff)), table_(std::move(table)) {
  if (!vocab_) throw Error(Errc::InvalidArgument, "TableLM requires a vocabulary");
  if (order_ < 0) throw Error(Errc::ModelFileInvalid, "TableLM order must be non-negative");
  const auto v = vocab_->size();
  validate_row(backoff_, v, "table model", "backoff");
  backoff_row_ = {backoff_, to_logits(backoff_)};
  for (const auto& [key, probs] : table_) {
    const auto name = key_string(key);
    if (key.size() > static_cast<std::size_t>(order_)) {
      throw Error(Errc::ModelFileInvalid, "table model: key '" + name + "' is longer than order " +
                                              std::to_string(order_));
    }
    for (TokenId t : key) {
      if (static_cast<std::size_t>(t) >= v) {
        throw Error(Errc::ModelFileInvalid, "table model: key '" + name + "' references an id outside the vocabulary");
      }
    }
    validate_row(probs, v, "table model", name);
    rows_.emplace(key, Row{probs, to_logits(probs)});
  }
}

TableLM TableLM::from_json(const json& doc, const std::string& where,
                           std::shared_ptr<const Vocabulary> shared_vocab) {
  if (!doc.is_object()) throw Error(Errc::ModelFileInvalid, where + ": model must be a JSON object");
  std::shared_ptr<const Vocabulary> vocab = shared_vocab;
  if (doc.contains("vocab")) {
    auto own = read_vocab(doc, where);
    if (vocab && !(*own == *vocab)) {
      throw Error(Errc::ModelFileInvalid, where + ": 'vocab' differs from the bundle vocabulary");
    }
    if (!vocab) vocab = std::move(own);
  }
  if (!vocab) throw Error(Errc::ModelFileInvalid, where + ": missing 'vocab' array");
  if (!doc.contains("order") || !doc["order"].is_number_integer()) {
    throw Error(Errc::ModelFileInvalid, where + ": missing integer 'order'");
  }
  const int order = doc["order"].get<int>();
  if (order < 0) throw Error(Errc::ModelFileInvalid, where + ": 'order' must be non-negative");
  if (!doc.contains("backoff")) throw Error(Errc::ModelFileInvalid, where + ": missing 'backoff' row");
  ProbVector backoff = read_row(doc["backoff"], where, "backoff");
  validate_row(backoff, vocab->size(), where, "backoff");

  std::map<std::vector<TokenId>, ProbVector> table;
  if (doc.contains("table")) {
    if (!doc["table"].is_object()) throw Error(Errc::ModelFileInvalid, where + ": 'table' must be an object");
    for (const auto& [key, value] : doc["table"].items()) {
      auto ids = parse_key(key, where);
      if (ids.size() > static_cast<std::size_t>(order)) {
        throw Error(Errc::ModelFileInvalid, where + ": table key '" + key + "' is longer than order " +
                                                std::to_string(order));
      }
      for (TokenId t : ids) {
        if (static_cast<std::size_t>(t) >= vocab->size()) {
          throw Error(Errc::ModelFileInvalid, where + ": table key '" + key + "' references an id outside the vocabulary");
        }
      }
      ProbVector row = read_row(value, where, key);
      validate_row(row, vocab->size(), where, key);
      table.emplace(std::move(ids), std::move(row));
    }
  }
  return TableLM(std::move(vocab), order, std::move(backoff), std::move(table));
}

const TableLM::Row& TableLM::lookup(std::span<const TokenId> context) const {
  const std::size_t longest = std::min(context.size(), static_cast<std::size_t>(order_));
  for (std::size_t len = longest + 1; len-- > 0;) {
    std::vector<TokenId> key(context.end() - static_cast<std::ptrdiff_t>(len), context.end());
    auto it = rows_.find(key);
    if (it != rows_.end()) return it->second;
  }
  return backoff_row_;
}

const ProbVector& TableLM::row_for(std::span<const TokenId> context) const {
  return lookup(context).probs;
}

LogitVector TableLM::next_logits(std::span<const TokenId> context) const {
  for (TokenId t : context) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_->size()) {
      throw Error(Errc::VocabMismatch, "context token " + std::to_string(t) + " outside vocabulary of size " +
                                           std::to_string(vocab_->size()));
    }
  }
  return lookup(context).logits;
}

std::vector<TokenId> TableLM::tokenize(std::string_view text) const {
  return whitespace_tokenize(*vocab_, text);
}

std::string TableLM::detokenize(std::span<const TokenId> tokens) const {
  return whitespace_detokenize(*vocab_, tokens);
}

json TableLM::to_json(bool include_vocab) const {
  json doc;
  doc["order"] = order_;
  if (include_vocab) doc["vocab"] = vocab_->tokens();
  doc["backoff"] = backoff_;
  json table = json::object();
  for (const auto& [key, probs] : table_) table[key_string(key)] = probs;
  doc["table"] = std::move(table);
  return doc;
}

// ---------------------------------------------------------------------------
// TableGuide

TableGuide::TableGuide(std::shared_ptr<const Vocabulary> vocab, std::vector<std::string> codes,
                       std::vector<TableLM> models, std::map<std::string, double> priors)
    : vocab_(std::move(vocab)), codes_(std::move(codes)), models_(std::move(models)) {
  if (codes_.size() != models_.size()) {
    throw Error(Errc::InvalidArgument, "one table model is required per control code");
  }
  for (const auto& m : models_) {
    if (!(m.vocabulary() == *vocab_)) {
      throw Error(Errc::VocabMismatch, "per-code tables must share the guide vocabulary");
    }
  }
  if (!priors.empty()) {
    double total = 0.0;
    for (const auto& code : codes_) {
      auto it = priors.find(code);
      if (it == priors.end()) throw Error(Errc::ModelFileInvalid, "missing prior for code '" + code + "'");
      if (!(it->second > 0.0) || !std::isfinite(it->second)) {
        throw Error(Errc::ModelFileInvalid, "prior for code '" + code + "' must be positive");
      }
      total += it->second;
    }
    if (priors.size() != codes_.size()) throw Error(Errc::ModelFileInvalid, "priors name unknown codes");
    if (std::abs(total - 1.0) > kRowTolerance) throw Error(Errc::ModelFileInvalid, "priors must sum to 1");
    priors_.insert(priors.begin(), priors.end());
  }
}

TableGuide TableGuide::from_json(const json& doc, const std::string& where) {
  if (!doc.is_object()) throw Error(Errc::ModelFileInvalid, where + ": guide must be a JSON object");
  auto vocab = read_vocab(doc, where);
  if (!doc.contains("codes") || !doc["codes"].is_object()) {
    throw Error(Errc::ModelFileInvalid, where + ": missing 'codes' object");
  }
  std::vector<std::string> codes;
  std::vector<TableLM> models;
  for (const auto& [label, model] : doc["codes"].items()) {
    if (label.empty()) throw Error(Errc::ModelFileInvalid, where + ": empty control code label");
    codes.push_back(label);
    models.push_back(TableLM::from_json(model, where + ": code '" + label + "'", vocab));
  }
  std::map<std::string, double> priors;
  if (doc.contains("priors")) {
    if (!doc["priors"].is_object()) throw Error(Errc::ModelFileInvalid, where + ": 'priors' must be an object");
    for (const auto& [label, p] : doc["priors"].items()) {
      if (!p.is_number()) throw Error(Errc::ModelFileInvalid, where + ": prior for '" + label + "' must be a number");
      priors.emplace(label, p.get<double>());
    }
  }
  try {
    return TableGuide(std::move(vocab), std::move(codes), std::move(models), std::move(priors));
  } catch (const Error& e) {
    throw Error(Errc::ModelFileInvalid, where + ": " + e.what());
  }
}

double TableGuide::prior(std::string_view code) const {
  require_code(code);
  if (priors_.empty()) return 1.0 / static_cast<double>(codes_.size());
  return priors_.find(code)->second;
}

const TableLM& TableGuide::model(std::string_view code) const {
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    if (codes_[i] == code) return models_[i];
  }
  throw Error(Errc::UnknownControlCode, "guide does not advertise control code '" + std::string(code) + "'");
}

LogitVector TableGuide::cc_next_logits(std::span<const TokenId> context, std::string_view code) const {
  return model(code).next_logits(context);
}

json TableGuide::to_json() const {
  json doc;
  doc["vocab"] = vocab_->tokens();
  json codes = json::object();
  for (std::size_t i = 0; i < codes_.size(); ++i) codes[codes_[i]] = models_[i].to_json(false);
  doc["codes"] = std::move(codes);
  if (!priors_.empty()) {
    json priors = json::object();
    for (const auto& [k, v] : priors_) priors[k] = v;
    doc["priors"] = std::move(priors);
  }
  return doc;
}

TableLM load_table_lm(const std::filesystem::path& path) {
  return TableLM::from_json(read_json_file(path), path.string());
}

TableGuide load_table_guide(const std::filesystem::path& path) {
  return TableGuide::from_json(read_json_file(path), path.string());
}

bool is_remote_spec(std::string_view spec) {
  return spec.starts_with("http://") || spec.starts_with("https://");
}

std::shared_ptr<const LanguageModel> open_base_model(const std::string& spec, RemoteOptions options) {
  if (spec.empty()) throw Error(Errc::InvalidArgument, "no base model given");
  if (is_remote_spec(spec)) return std::make_shared<RemoteLM>(spec, options);
  return std::make_shared<TableLM>(load_table_lm(spec));
}

std::shared_ptr<const ClassConditionalModel> open_guide_model(const std::string& spec, RemoteOptions options) {
  if (spec.empty()) throw Error(Errc::InvalidArgument, "no guide model given");
  if (is_remote_spec(spec)) return std::make_shared<RemoteLM>(spec, options);
  return std::make_shared<TableGuide>(load_table_guide(spec));
}

}  // namespace plugblend
