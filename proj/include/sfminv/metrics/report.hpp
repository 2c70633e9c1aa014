#pragma once

// Experiment drivers and report plumbing: per-sample metric rows, CSV in the
// fixed column order, a rendered text table grouped like the paper's
// sparsity sweeps, and the dropout-then-invert sweep itself.

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "sfminv/metrics/metrics.hpp"
#include "sfminv/nets/bundle.hpp"
#include "sfminv/render/rasterize.hpp"

namespace sfminv::metrics {

struct MetricRow {
  std::string sample_id;
  std::string schema;
  std::string visibility_mode;
  double sparsity = 1.0;
  double mae = 0;
  double ssim = 0;
  double visib_acc = std::numeric_limits<double>::quiet_NaN();  // NaN when untracked
};

struct Aggregate {
  double mae = 0, ssim = 0, visib_acc = 0;
  int count = 0;
  bool has_acc = false;
};

struct MetricReport {
  std::vector<MetricRow> rows;

  // Mean of per-sample values per (schema, visibility, sparsity) group;
  // recomputable bit-for-bit from the CSV.
  std::map<std::tuple<std::string, std::string, double>, Aggregate> aggregates() const {
    std::map<std::tuple<std::string, std::string, double>, Aggregate> out;
    for (const auto& r : rows) {
      auto& a = out[{r.schema, r.visibility_mode, r.sparsity}];
      a.mae += r.mae;
      a.ssim += r.ssim;
      if (!std::isnan(r.visib_acc)) {
        a.visib_acc += r.visib_acc;
        a.has_acc = true;
      }
      ++a.count;
    }
    for (auto& [key, a] : out) {
      a.mae /= a.count;
      a.ssim /= a.count;
      if (a.has_acc) a.visib_acc /= a.count;
    }
    return out;
  }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

// Minimal CSV quoting: fields holding commas or quotes are wrapped in
// double quotes with embedded quotes doubled.
inline std::string csv_field(const std::string& s) {
  if (s.find(',') == std::string::npos && s.find('"') == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> cols;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cols.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cols.push_back(std::move(cur));
  return cols;
}

}  // namespace detail

inline void write_csv(const std::string& path, const MetricReport& report) {
  std::ofstream os(path);
  require(bool(os), errc::io_failure, "cannot open for writing: " + path);
  os << "sample_id,schema,visibility_mode,sparsity,mae,ssim,visib_acc\n";
  for (const auto& r : report.rows) {
    os << detail::csv_field(r.sample_id) << ',' << detail::csv_field(r.schema) << ','
       << detail::csv_field(r.visibility_mode) << ',' << detail::fmt(r.sparsity) << ','
       << detail::fmt(r.mae) << ',' << detail::fmt(r.ssim) << ',';
    if (!std::isnan(r.visib_acc)) os << detail::fmt(r.visib_acc);
    os << '\n';
  }
  require(bool(os), errc::io_failure, "write failed: " + path);
}

inline MetricReport read_csv(const std::string& path) {
  std::ifstream is(path);
  require(bool(is), errc::missing_file, "cannot open: " + path);
  MetricReport report;
  std::string line;
  require(bool(std::getline(is, line)), errc::malformed_record, path + ": empty csv");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cols = detail::csv_split(line);
    require(cols.size() == 7, errc::malformed_record, path + ": bad row '" + line + "'");
    MetricRow r;
    r.sample_id = cols[0];
    r.schema = cols[1];
    r.visibility_mode = cols[2];
    auto num = [&](const std::string& s) {
      double v{};
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      require(ec == std::errc() && p == s.data() + s.size(), errc::malformed_record,
              path + ": bad number '" + s + "'");
      return v;
    };
    r.sparsity = num(cols[3]);
    r.mae = num(cols[4]);
    r.ssim = num(cols[5]);
    r.visib_acc = cols[6].empty() ? std::numeric_limits<double>::quiet_NaN() : num(cols[6]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

// Text table in the paper's layout: one row per variant, metric columns per
// sparsity level.
inline std::string render_table(const MetricReport& report) {
  auto aggs = report.aggregates();
  std::vector<double> levels;
  std::map<std::pair<std::string, std::string>, int> variants;
  for (const auto& [key, agg] : aggs) {
    if (std::find(levels.begin(), levels.end(), std::get<2>(key)) == levels.end())
      levels.push_back(std::get<2>(key));
    variants[{std::get<0>(key), std::get<1>(key)}] = 1;
  }
  std::sort(levels.begin(), levels.end());

  std::ostringstream os;
  os << std::left << std::setw(14) << "schema" << std::setw(12) << "visibility";
  for (auto what : {"MAE", "SSIM"})
    for (double lv : levels) {
      std::ostringstream h;
      h << what << ' ' << int(std::lround(lv * 100)) << '%';
      os << std::right << std::setw(11) << h.str();
    }
  os << '\n';
  for (const auto& [variant, one] : variants) {
    os << std::left << std::setw(14) << variant.first << std::setw(12) << variant.second;
    for (auto what : {0, 1})
      for (double lv : levels) {
        auto it = aggs.find({variant.first, variant.second, lv});
        os << std::right << std::setw(11);
        if (it == aggs.end()) {
          os << "-";
        } else {
          std::ostringstream v;
          v << std::fixed << std::setprecision(4) << (what == 0 ? it->second.mae : it->second.ssim);
          os << v.str();
        }
      }
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

struct EvalSample {
  std::string id;
  render::FeatureMap map;
  Image target;
  std::optional<geom::VisibilityMask> truth;  // enables accuracy tracking
};

// Per ratio: seeded dropout, full-cascade inversion, metrics against the
// target. Deterministic for a fixed seed.
template <typename T>
MetricReport sparsity_sweep(nets::NetworkBundle<T>& bundle,
                            const std::vector<EvalSample>& samples,
                            const std::vector<double>& ratios = {0.2, 0.6, 1.0},
                            std::uint64_t seed = 0,
                            nets::VisibilityMode mode = nets::VisibilityMode::net) {
  MetricReport report;
  for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
    const double ratio = ratios[ri];
    for (std::size_t si = 0; si < samples.size(); ++si) {
      const auto& sample = samples[si];
      auto dropped = render::apply_dropout(sample.map, ratio,
                                           splitmix64(seed ^ (ri * 7919 + si + 1)));
      nets::InvertOptions opts;
      opts.visibility = mode;
      auto image = nets::invert(bundle, dropped, opts);
      MetricRow row;
      row.sample_id = sample.id;
      row.schema = sample.map.schema.str();
      row.visibility_mode = nets::visibility_mode_name(mode);
      row.sparsity = ratio;
      row.mae = mae(image, sample.target);
      row.ssim = ssim(image, sample.target);
      if (sample.truth) {
        // threshold VisibNet's field into a mask over the surviving cells
        auto field = nets::forward_visibnet(bundle.visibnet, dropped);
        geom::VisibilityMask pred(dropped.height, dropped.width);
        geom::VisibilityMask truth(dropped.height, dropped.width);
        for (int r = 0; r < dropped.height; ++r)
          for (int c = 0; c < dropped.width; ++c) {
            if (!dropped.occupied(r, c)) continue;
            const double p = (double(field.at(0, 0, r, c)) + 1.0) / 2.0;
            pred.set(r, c, p >= 0.5 ? geom::Vis::visible : geom::Vis::occluded);
            truth.set(r, c, sample.truth->at(r, c));
          }
        row.visib_acc = visibility_accuracy(pred, truth);
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace sfminv::metrics
