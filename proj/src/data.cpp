#include "hain/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hain/common.hpp"

namespace hain {

void Dataset::validate() const {
  if (y.size() != X.rows()) throw ContractError("Dataset: label count does not match row count");
  if (feature_names.size() != X.cols())
    throw ContractError("Dataset: feature name count does not match column count");
  for (std::size_t v : y) {
    if (v >= class_names.size()) throw ContractError("Dataset: label index outside class_names");
  }
  std::set<std::string> uniq(feature_names.begin(), feature_names.end());
  if (uniq.size() != feature_names.size())
    throw ContractError("Dataset: feature names are not unique");
  if (!X.all_finite()) throw ContractError("Dataset: non-finite feature values");
}

namespace {

// RFC-4180 tokenizer: quoted fields may contain commas, newlines, and
// doubled quotes. Records are returned with raw string cells.
std::vector<std::vector<std::string>> parse_csv_records(const std::string& text,
                                                        const std::string& path) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record = {};
  };
  while (i < n) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field += '"';
          i += 2;
        } else {
          in_quotes = false;
          ++i;
        }
      } else {
        field += c;
        ++i;
      }
    } else if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
      ++i;
    } else if (c == ',') {
      end_field();
      ++i;
    } else if (c == '\r' && i + 1 < n && text[i + 1] == '\n') {
      end_record();
      i += 2;
    } else if (c == '\n') {
      end_record();
      ++i;
    } else {
      field += c;
      field_started = true;
      ++i;
    }
  }
  if (in_quotes) throw FormatError(path + ": unterminated quoted field");
  if (field_started || !record.empty()) end_record();
  return records;
}

bool parse_double(const std::string& s, double* out) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t') ++end;
  if (*end != '\0') return false;
  *out = v;
  return true;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column,
                 bool has_header, const LoadOptions& opts, LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_csv: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  auto records = parse_csv_records(buf.str(), path);
  if (records.empty()) throw ContractError(path + ": file is empty");

  std::vector<std::string> header;
  std::size_t first_data = 0;
  if (has_header) {
    header = records[0];
    first_data = 1;
    std::set<std::string> uniq(header.begin(), header.end());
    if (uniq.size() != header.size())
      throw FormatError(path + ": duplicate header names");
  } else {
    header.resize(records[0].size());
    for (std::size_t j = 0; j < header.size(); ++j) header[j] = "f" + std::to_string(j);
  }
  if (records.size() <= first_data) throw ContractError(path + ": no data rows");

  std::size_t label_idx = header.size();
  if (has_header) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == label_column) label_idx = j;
    if (label_idx == header.size())
      throw ContractError(path + ": label column '" + label_column + "' not found");
  } else {
    double idx = 0;
    if (!parse_double(label_column, &idx) || idx < 0 || idx >= double(header.size()))
      throw ContractError(path + ": label column index '" + label_column + "' invalid");
    label_idx = static_cast<std::size_t>(idx);
  }

  const std::size_t ncols = header.size();
  const std::size_t d = ncols - 1;
  std::vector<std::string> feature_names;
  feature_names.reserve(d);
  for (std::size_t j = 0; j < ncols; ++j)
    if (j != label_idx) feature_names.push_back(header[j]);

  struct Row {
    std::vector<double> x;
    std::vector<bool> missing;
    std::string label;
  };
  std::vector<Row> rows;
  LoadReport local;
  for (std::size_t r = first_data; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;  // trailing blank line
    const std::size_t data_row = r - first_data + 1;
    if (rec.size() != ncols)
      throw FormatError(path + ": row " + std::to_string(data_row) + " has " +
                        std::to_string(rec.size()) + " fields, expected " +
                        std::to_string(ncols));
    Row row;
    row.x.resize(d);
    row.missing.resize(d, false);
    bool any_missing = false;
    std::size_t fj = 0;
    for (std::size_t j = 0; j < ncols; ++j) {
      if (j == label_idx) {
        row.label = rec[j];
        if (row.label.empty()) any_missing = true;
        continue;
      }
      if (rec[j].empty()) {
        row.missing[fj] = true;
        any_missing = true;
      } else {
        double v;
        if (!parse_double(rec[j], &v))
          throw FormatError(path + ": row " + std::to_string(data_row) + ", column '" +
                            header[j] + "': cannot parse '" + rec[j] + "' as a number");
        if (!std::isfinite(v))
          throw FormatError(path + ": row " + std::to_string(data_row) + ", column '" +
                            header[j] + "': non-finite value");
        row.x[fj] = v;
      }
      ++fj;
    }
    if (any_missing && (!opts.impute_missing || row.label.empty())) {
      local.rows_rejected++;
      local.rejected_rows.push_back(data_row);
      continue;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ContractError(path + ": no usable data rows");

  if (opts.impute_missing) {
    std::vector<double> sums(d, 0.0);
    std::vector<std::size_t> counts(d, 0);
    for (const Row& row : rows)
      for (std::size_t j = 0; j < d; ++j)
        if (!row.missing[j]) {
          sums[j] += row.x[j];
          counts[j]++;
        }
    for (Row& row : rows)
      for (std::size_t j = 0; j < d; ++j)
        if (row.missing[j]) {
          row.x[j] = counts[j] ? sums[j] / double(counts[j]) : 0.0;
          local.values_imputed++;
        }
  }

  Dataset ds;
  ds.X = Matrix2D(rows.size(), d);
  ds.y.resize(rows.size());
  ds.feature_names = std::move(feature_names);
  std::map<std::string, std::size_t> class_index;  // assigned in first-appearance order
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) ds.X(i, j) = rows[i].x[j];
    auto it = class_index.find(rows[i].label);
    if (it == class_index.end()) {
      it = class_index.emplace(rows[i].label, ds.class_names.size()).first;
      ds.class_names.push_back(rows[i].label);
    }
    ds.y[i] = it->second;
  }
  local.rows_kept = rows.size();
  if (report) *report = local;
  ds.validate();
  return ds;
}

Dataset standardize(const Dataset& ds) {
  const std::size_t n = ds.num_samples(), d = ds.num_features();
  if (n < 2) throw ContractError("standardize: need at least 2 samples");
  Standardization stats;
  stats.mean.resize(d);
  stats.stddev.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += ds.X(i, j);
    m /= double(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = ds.X(i, j) - m;
      var += c * c;
    }
    var /= double(n);
    stats.mean[j] = m;
    stats.stddev[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  Dataset out = ds;
  out.X = apply_standardization(stats, ds.X);
  out.standardization = std::move(stats);
  return out;
}

Matrix2D apply_standardization(const Standardization& stats, const Matrix2D& X) {
  if (stats.mean.size() != X.cols())
    throw ShapeError("apply_standardization: stats cover " + std::to_string(stats.mean.size()) +
                     " features, matrix has " + std::to_string(X.cols()));
  Matrix2D out = X;
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j)
      out(i, j) = (X(i, j) - stats.mean[j]) / stats.stddev[j];
  return out;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double test_fraction, Rng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ContractError("stratified_split: test_fraction must be in (0,1)");
  const std::size_t K = ds.num_classes();
  std::vector<std::vector<std::size_t>> by_class(K);
  for (std::size_t i = 0; i < ds.num_samples(); ++i) by_class[ds.y[i]].push_back(i);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t c = 0; c < K; ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 2)
      throw ContractError("stratified_split: class '" + ds.class_names[c] +
                          "' has fewer than 2 samples");
    rng.shuffle(idx);
    std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * double(idx.size())));
    n_test = std::min(std::max<std::size_t>(n_test, 1), idx.size() - 1);
    for (std::size_t k = 0; k < idx.size(); ++k)
      (k < n_test ? test_idx : train_idx).push_back(idx[k]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  auto take = [&](const std::vector<std::size_t>& sel) {
    Dataset out;
    out.X = Matrix2D(sel.size(), ds.num_features());
    out.y.resize(sel.size());
    out.feature_names = ds.feature_names;
    out.class_names = ds.class_names;
    out.standardization = ds.standardization;
    for (std::size_t i = 0; i < sel.size(); ++i) {
      for (std::size_t j = 0; j < ds.num_features(); ++j) out.X(i, j) = ds.X(sel[i], j);
      out.y[i] = ds.y[sel[i]];
    }
    return out;
  };
  return {take(train_idx), take(test_idx)};
}

std::pair<Dataset, std::vector<std::size_t>> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_informative > spec.d)
    throw ContractError("generate_synthetic: n_informative exceeds d");
  if (spec.num_classes < 2) throw ContractError("generate_synthetic: need at least 2 classes");
  if (spec.n < spec.num_classes)
    throw ContractError("generate_synthetic: need at least one sample per class");
  if (spec.separation < 0.0) throw ContractError("generate_synthetic: separation must be >= 0");

  Rng rng(spec.seed);
  Rng pick = rng.fork(1);
  Rng signs = rng.fork(2);
  Rng noise = rng.fork(3);

  std::vector<std::size_t> all(spec.d);
  for (std::size_t j = 0; j < spec.d; ++j) all[j] = j;
  pick.shuffle(all);
  std::vector<std::size_t> informative(all.begin(), all.begin() + std::ptrdiff_t(spec.n_informative));
  std::sort(informative.begin(), informative.end());

  // Distinct ±separation/2 sign pattern per class on the planted coordinates.
  const double amp = spec.separation / 2.0;
  std::vector<std::vector<double>> pattern(spec.num_classes,
                                           std::vector<double>(spec.n_informative, 0.0));
  std::set<std::vector<int>> seen;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    std::vector<int> bits(spec.n_informative);
    for (std::size_t tries = 0;; ++tries) {
      for (std::size_t j = 0; j < spec.n_informative; ++j)
        bits[j] = (signs.next_u64() & 1u) ? 1 : -1;
      if (spec.n_informative == 0 || seen.insert(bits).second || tries > 64) break;
    }
    for (std::size_t j = 0; j < spec.n_informative; ++j) pattern[c][j] = amp * bits[j];
  }

  Dataset ds;
  ds.X = Matrix2D(spec.n, spec.d);
  ds.y.resize(spec.n);
  ds.feature_names.resize(spec.d);
  for (std::size_t j = 0; j < spec.d; ++j) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "f%04zu", j);
    ds.feature_names[j] = buf;
  }
  ds.class_names.resize(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c)
    ds.class_names[c] = "class_" + std::to_string(c);

  std::vector<std::size_t> inf_slot(spec.d, spec.d);
  for (std::size_t k = 0; k < informative.size(); ++k) inf_slot[informative[k]] = k;

  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t c = i % spec.num_classes;  // balanced by construction
    ds.y[i] = c;
    for (std::size_t j = 0; j < spec.d; ++j) {
      const double mu = inf_slot[j] < spec.d ? pattern[c][inf_slot[j]] : 0.0;
      ds.X(i, j) = mu + (spec.noise_stddev > 0.0 ? noise.normal(0.0, spec.noise_stddev) : 0.0);
    }
  }
  ds.validate();
  return {std::move(ds), std::move(informative)};
}

}  // namespace hain
