#include "robustdp/report.hpp"

#include <cmath>
#include <cstdio>

#include "robustdp/errors.hpp"

namespace robustdp {

using nlohmann::json;

json to_json(ExtReal v) { return number_json(v.value()); }

json number_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

ExtReal ext_from_json(const json& j) {
  if (j.is_number()) return ExtReal(j.get<double>());
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "+inf" || s == "inf") return ExtReal::pos_inf();
    if (s == "-inf") return ExtReal::neg_inf();
  }
  throw ParseError("expected a number or an infinity string");
}

namespace {

void render(const json& j, int depth, std::string& out) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close(2 * depth, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map order: sorted
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        render(it.value(), depth + 1, out);
      }
      out += "\n" + close + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        render(j[i], depth + 1, out);
      }
      out += "\n" + close + "]";
      return;
    }
    case json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += json(v > 0 ? "+inf" : "-inf").dump();
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string render_canonical(const json& j) {
  std::string out;
  render(j, 0, out);
  out += "\n";
  return out;
}

}  // namespace robustdp
