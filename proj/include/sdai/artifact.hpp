#pragma once

// Versioned JSON container for trained models. Matrices are stored as
// base64 of little-endian IEEE-754 doubles with their shape, so a
// save/load round trip is bit-exact. A 64-bit FNV-1a checksum over the
// compact dump of the payload guards against edits and truncation.

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "sdai/csv.hpp"
#include "sdai/training.hpp"

namespace sdai {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline constexpr char kBase64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const auto n = (std::uint32_t(std::uint8_t(bytes[i])) << 16) | (std::uint32_t(std::uint8_t(bytes[i + 1])) << 8) |
                   std::uint8_t(bytes[i + 2]);
    out += kBase64Alphabet[(n >> 18) & 63];
    out += kBase64Alphabet[(n >> 12) & 63];
    out += kBase64Alphabet[(n >> 6) & 63];
    out += kBase64Alphabet[n & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t n = std::uint32_t(std::uint8_t(bytes[i])) << 16;
    if (i + 1 < bytes.size()) n |= std::uint32_t(std::uint8_t(bytes[i + 1])) << 8;
    out += kBase64Alphabet[(n >> 18) & 63];
    out += kBase64Alphabet[(n >> 12) & 63];
    out += i + 1 < bytes.size() ? kBase64Alphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

inline std::string base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw DataError("artifact: base64 length is not a multiple of 4");
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t n = 0;
    int pad = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
        n <<= 6;
        continue;
      }
      const int v = value(c);
      if (v < 0 || pad) throw DataError("artifact: invalid base64 character");
      n = (n << 6) | static_cast<std::uint32_t>(v);
    }
    out += static_cast<char>((n >> 16) & 255);
    if (pad < 2) out += static_cast<char>((n >> 8) & 255);
    if (pad < 1) out += static_cast<char>(n & 255);
  }
  return out;
}

template <class M>
nlohmann::json matrix_to_json(const M& m) {
  std::string bytes(static_cast<std::size_t>(m.size()) * 8, '\0');
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(m.data()[i]);
    for (int b = 0; b < 8; ++b) bytes[static_cast<std::size_t>(i) * 8 + b] = static_cast<char>((bits >> (8 * b)) & 255);
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", base64_encode(bytes)}};
}

inline DenseMatrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (rows < 0 || cols < 0) throw DataError("artifact: negative matrix shape");
  const std::string bytes = base64_decode(j.at("data").get<std::string>());
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * 8)
    throw DataError("artifact: matrix payload does not match its shape");
  DenseMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= std::uint64_t(std::uint8_t(bytes[static_cast<std::size_t>(i) * 8 + b])) << (8 * b);
    m.data()[i] = std::bit_cast<double>(bits);
  }
  return m;
}

inline Vector vector_from_json(const nlohmann::json& j) {
  const DenseMatrix m = matrix_from_json(j);
  if (m.rows() != 1) throw DataError("artifact: bias must be a single row");
  return m.row(0);
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace detail

namespace detail {

/// Reads j[key] into out when present, naming the key on a type error.
template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& context) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(context + "." + key + ": " + e.what());
  }
}

inline void require_object(const nlohmann::json& j, const std::string& context,
                           std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw InvalidArgument(context + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) == keys.end())
      throw InvalidArgument(context + "." + k + ": unknown key");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Hyperparameters

inline nlohmann::json hyperparams_to_json(const Hyperparams& hp) {
  return {{"encoder_sizes", hp.encoder_sizes},
          {"dropout_probs", hp.dropout_probs},
          {"l2_lambda", hp.l2_lambda},
          {"pretrain_noise_fraction", hp.pretrain_noise_fraction},
          {"optimizer", std::string(to_string(hp.optimizer.kind))},
          {"learning_rate", hp.optimizer.learning_rate},
          {"batch_size", hp.batch_size},
          {"pretrain_epochs", hp.pretrain_epochs},
          {"finetune_epochs", hp.finetune_epochs},
          {"hidden_activation", std::string(to_string(hp.hidden_activation))},
          {"pretrain", hp.pretrain},
          {"seed", hp.seed}};
}

/// Reads the keys present in `j` over the defaults in `hp`; errors name the
/// offending key.
inline Hyperparams hyperparams_from_json(const nlohmann::json& j, Hyperparams hp = {}) {
  const std::string ctx = "hyperparams";
  detail::require_object(j, ctx,
                         {"encoder_sizes", "dropout_probs", "l2_lambda", "pretrain_noise_fraction", "optimizer",
                          "learning_rate", "batch_size", "pretrain_epochs", "finetune_epochs", "hidden_activation",
                          "pretrain", "seed"});
  detail::read_field(j, "encoder_sizes", hp.encoder_sizes, ctx);
  detail::read_field(j, "dropout_probs", hp.dropout_probs, ctx);
  detail::read_field(j, "l2_lambda", hp.l2_lambda, ctx);
  detail::read_field(j, "pretrain_noise_fraction", hp.pretrain_noise_fraction, ctx);
  detail::read_field(j, "learning_rate", hp.optimizer.learning_rate, ctx);
  detail::read_field(j, "batch_size", hp.batch_size, ctx);
  detail::read_field(j, "pretrain_epochs", hp.pretrain_epochs, ctx);
  detail::read_field(j, "finetune_epochs", hp.finetune_epochs, ctx);
  detail::read_field(j, "pretrain", hp.pretrain, ctx);
  detail::read_field(j, "seed", hp.seed, ctx);
  std::string name;
  try {
    if (j.contains("optimizer")) {
      detail::read_field(j, "optimizer", name, ctx);
      hp.optimizer.kind = optimizer_from_string(name);
    }
    if (j.contains("hidden_activation")) {
      detail::read_field(j, "hidden_activation", name, ctx);
      hp.hidden_activation = activation_from_string(name);
    }
  } catch (const InvalidArgument& e) {
    const std::string what = e.what();
    throw InvalidArgument(what.rfind(ctx, 0) == 0 ? what : ctx + ": " + what);
  }
  return hp;
}

// ---------------------------------------------------------------------------
// Model artifact

inline nlohmann::json model_to_json(const SdaiModel& model) {
  using nlohmann::json;
  const auto& net = model.network;
  json stats = json::array();
  for (const auto& s : model.stats)
    stats.push_back({{"mean", s.mean}, {"std", s.std}, {"zero_variance", s.zero_variance}, {"frequencies", s.frequencies}});
  json heads = json::array();
  for (const auto& h : net.heads)
    heads.push_back({{"begin", h.range.begin}, {"end", h.range.end}, {"kind", std::string(to_string(h.kind))}});
  json encoder = json::array();
  for (const auto& l : net.encoder)
    encoder.push_back({{"weight", detail::matrix_to_json(l.weight)},
                       {"bias", detail::matrix_to_json(l.bias)},
                       {"activation", std::string(to_string(l.activation))}});
  json dec = json::array();
  for (const auto& b : net.decoder_biases) dec.push_back(detail::matrix_to_json(b));
  json network{{"encoder", encoder}, {"decoder_biases", dec}, {"tied_final_layer", net.tied_final_layer}};
  if (net.untied_final_weight) network["untied_final_weight"] = detail::matrix_to_json(*net.untied_final_weight);

  json payload{{"format", "sdai-model"},
               {"format_version", kModelFormatVersion},
               {"schema", schema_to_json(model.schema)},
               {"column_stats", stats},
               {"hyperparams", hyperparams_to_json(model.hyperparams)},
               {"head_spec", heads},
               {"network", network}};
  payload["checksum"] = detail::hex64(fnv1a64(payload.dump()));
  return payload;
}

inline SdaiModel model_from_json(nlohmann::json j) {
  try {
    if (!j.is_object() || j.value("format", "") != "sdai-model") throw DataError("not an sdai model artifact");
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw DataError("unsupported model format_version " + std::to_string(version) + " (expected " +
                      std::to_string(kModelFormatVersion) + ")");
    const std::string stored = j.at("checksum").get<std::string>();
    j.erase("checksum");
    const std::string actual = detail::hex64(fnv1a64(j.dump()));
    if (stored != actual) throw DataError("model checksum mismatch (stored " + stored + ", computed " + actual + ")");

    SdaiModel m;
    m.schema = schema_from_json(j.at("schema"));
    for (const auto& s : j.at("column_stats"))
      m.stats.push_back({s.at("mean").get<double>(), s.at("std").get<double>(), s.at("zero_variance").get<bool>(),
                         s.at("frequencies").get<std::vector<double>>()});
    m.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    for (const auto& h : j.at("head_spec"))
      m.network.heads.push_back({{h.at("begin").get<std::size_t>(), h.at("end").get<std::size_t>()},
                                 head_kind_from_string(h.at("kind").get<std::string>())});
    const auto& net = j.at("network");
    for (const auto& l : net.at("encoder"))
      m.network.encoder.push_back({detail::matrix_from_json(l.at("weight")), detail::vector_from_json(l.at("bias")),
                                   activation_from_string(l.at("activation").get<std::string>())});
    for (const auto& b : net.at("decoder_biases")) m.network.decoder_biases.push_back(detail::vector_from_json(b));
    m.network.tied_final_layer = net.at("tied_final_layer").get<bool>();
    if (net.contains("untied_final_weight"))
      m.network.untied_final_weight = detail::matrix_from_json(net.at("untied_final_weight"));
    validate_model(m.network);
    if (m.stats.size() != m.schema.size()) throw DataError("artifact: column_stats do not match the schema");
    if (encoded_width(m.schema) != m.network.input_width())
      throw DataError("artifact: network width does not match the schema");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model artifact: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("inconsistent model artifact: ") + e.what());
  }
}

inline std::string serialize_model(const SdaiModel& model) { return model_to_json(model).dump(1) + "\n"; }

inline SdaiModel deserialize_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("truncated or malformed model artifact: ") + e.what());
  }
  return model_from_json(std::move(j));
}

inline void save_model(const std::string& path, const SdaiModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << serialize_model(model);
}

inline SdaiModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace sdai
