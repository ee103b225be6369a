#include "loschmidt/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace loschmidt {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string series_to_csv(const EchoSeries& series) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const MethodSeries& ms : series.series) {
    for (std::size_t j = 0; j < series.times.size(); ++j) {
      const cplx v = ms.values[j];
      const double abs2 = std::norm(v);
      out += format_double(series.times[j]);
      out += ',';
      out += method_name(ms.method);
      out += ',';
      out += format_double(v.real());
      out += ',';
      out += format_double(v.imag());
      out += ',';
      out += format_double(abs2);
      out += ',';
      out += format_double(ms.se_re[j]);
      out += ',';
      out += format_double(ms.se_im[j]);
      out += ',';
      out += format_double(ms.diag[j].w_mean);
      out += ',';
      out += format_double(ms.diag[j].err13_mean);
      out += ',';
      out += format_double(ms.diag[j].eta_db_eta);
      out += ',';
      out += ms.diag[j].caustic ? '1' : '0';
      out += '\n';
    }
  }
  return out;
}

nlohmann::json series_to_json(const EchoSeries& series) {
  nlohmann::json root;
  root["times"] = series.times;
  nlohmann::json list = nlohmann::json::array();
  for (const MethodSeries& ms : series.series) {
    nlohmann::json entry;
    entry["method"] = method_name(ms.method);
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array(),
                   abs2 = nlohmann::json::array(), w = nlohmann::json::array(),
                   err13 = nlohmann::json::array(), eta = nlohmann::json::array(),
                   caustic = nlohmann::json::array();
    auto push_num = [](nlohmann::json& arr, double v) {
      if (std::isnan(v)) {
        arr.push_back(nullptr);
      } else {
        arr.push_back(v);
      }
    };
    for (std::size_t j = 0; j < series.times.size(); ++j) {
      push_num(re, ms.values[j].real());
      push_num(im, ms.values[j].imag());
      push_num(abs2, std::norm(ms.values[j]));
      push_num(w, ms.diag[j].w_mean);
      push_num(err13, ms.diag[j].err13_mean);
      push_num(eta, ms.diag[j].eta_db_eta);
      caustic.push_back(ms.diag[j].caustic ? 1 : 0);
    }
    entry["re"] = re;
    entry["im"] = im;
    entry["abs2"] = abs2;
    entry["se_re"] = ms.se_re;
    entry["se_im"] = ms.se_im;
    entry["diag_w_mean"] = w;
    entry["diag_err13_mean"] = err13;
    entry["diag_eta_db_eta"] = eta;
    entry["caustic_flag"] = caustic;
    list.push_back(entry);
  }
  root["series"] = list;
  return root;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open output file \"" + path + "\"");
  out << content;
  if (!out) throw ValidationError("failed writing output file \"" + path + "\"");
}

}  // namespace loschmidt
