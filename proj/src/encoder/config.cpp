#include "ventcast/encoder/config.hpp"

#include "ventcast/error.hpp"
#include "ventcast/io/values.hpp"

namespace ventcast::encoder {

void EncoderConfig::validate() const {
  if (n_layers == 0 || d_model == 0 || n_heads == 0 || d_head == 0 || d_inner == 0 || max_len < 2) {
    fail(ErrorKind::config, "encoder config: extents must be positive and max_len >= 2");
  }
  if (d_model != n_heads * d_head) {
    fail(ErrorKind::config, "encoder config: d_model (" + std::to_string(d_model) + ") must equal n_heads x d_head");
  }
  if (!(predict_fraction > 0.0 && predict_fraction <= 1.0)) {
    fail(ErrorKind::config, "encoder config: predict_fraction must lie in (0,1]");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::config, "encoder config: dropout must lie in [0,1)");
}

std::vector<std::pair<std::string, std::string>> EncoderConfig::to_entries() const {
  return {{"n_layers", std::to_string(n_layers)},
          {"d_model", std::to_string(d_model)},
          {"n_heads", std::to_string(n_heads)},
          {"d_head", std::to_string(d_head)},
          {"d_inner", std::to_string(d_inner)},
          {"max_len", std::to_string(max_len)},
          {"vocab_size", std::to_string(vocab_size)},
          {"mem_len", std::to_string(mem_len)},
          {"predict_fraction", io::format_real(predict_fraction)},
          {"dropout", io::format_real(dropout)}};
}

EncoderConfig EncoderConfig::from_entries(const std::vector<std::pair<std::string, std::string>>& entries) {
  EncoderConfig c;
  for (const auto& [k, v] : entries) {
    if (k == "n_layers") c.n_layers = io::parse_count(k, v);
    else if (k == "d_model") c.d_model = io::parse_count(k, v);
    else if (k == "n_heads") c.n_heads = io::parse_count(k, v);
    else if (k == "d_head") c.d_head = io::parse_count(k, v);
    else if (k == "d_inner") c.d_inner = io::parse_count(k, v);
    else if (k == "max_len") c.max_len = io::parse_count(k, v);
    else if (k == "vocab_size") c.vocab_size = io::parse_count(k, v);
    else if (k == "mem_len") c.mem_len = io::parse_count(k, v);
    else if (k == "predict_fraction") c.predict_fraction = io::parse_real(k, v);
    else if (k == "dropout") c.dropout = io::parse_real(k, v);
  }
  return c;
}

}  // namespace ventcast::encoder
