#pragma once

#include <string>

#include <json.hpp>

#include "loschmidt/engine.hpp"

namespace loschmidt {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr const char* kCsvHeader =
    "t,method,re,im,abs2,se_re,se_im,diag_w_mean,diag_err13_mean,diag_eta_db_eta,caustic_flag";

/// Shortest decimal string that round-trips to the same double ("nan" for NaN).
std::string format_double(double v);

/// One row per (method, time), methods in request order, times ascending.
std::string series_to_csv(const EchoSeries& series);

/// Column-oriented JSON mirror of the CSV content (NaN rendered as null).
nlohmann::json series_to_json(const EchoSeries& series);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace loschmidt
