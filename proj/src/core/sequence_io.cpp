#include "loadcycle/core/sequence_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "loadcycle/error.hpp"

namespace loadcycle::core {

namespace {

std::string format_value(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_value(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) {
    fail(ErrorCode::bad_format, "line " + std::to_string(line_no) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace

void write_sequence(std::ostream& out, const LabeledSequence& seq) {
  validate(seq);
  out << kSequenceHeader << '\n';
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const auto& f = seq.frames[i];
    out << format_value(f.t) << ',' << format_value(f.p_bu) << ',' << format_value(f.v_veh) << ','
        << format_value(f.u_js) << ',' << format_value(f.p_cc) << ',' << format_value(f.p_bo) << ','
        << to_index(seq.labels[i]) << '\n';
  }
}

LabeledSequence read_sequence(std::istream& in, Origin origin, const std::string& cycle_id) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::bad_format, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSequenceHeader) fail(ErrorCode::bad_format, "unexpected header '" + line + "'");

  LabeledSequence seq;
  seq.origin = origin;
  seq.cycle_id = cycle_id;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string_view, 7> fields;
    std::size_t n = 0, pos = 0;
    const std::string_view view(line);
    while (n < fields.size()) {
      const auto comma = view.find(',', pos);
      fields[n++] = view.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
      if (n == fields.size()) fail(ErrorCode::bad_format, "line " + std::to_string(line_no) + ": too many fields");
    }
    if (n != fields.size()) fail(ErrorCode::bad_format, "line " + std::to_string(line_no) + ": expected 7 fields");

    TelemetryFrame f;
    f.t = parse_value(fields[0], line_no);
    f.p_bu = parse_value(fields[1], line_no);
    f.v_veh = parse_value(fields[2], line_no);
    f.u_js = std::clamp(parse_value(fields[3], line_no), -1.0, 1.0);
    f.p_cc = parse_value(fields[4], line_no);
    f.p_bo = parse_value(fields[5], line_no);
    int code = -1;
    const auto res = std::from_chars(fields[6].data(), fields[6].data() + fields[6].size(), code);
    if (res.ec != std::errc{} || res.ptr != fields[6].data() + fields[6].size()) {
      fail(ErrorCode::bad_format, "line " + std::to_string(line_no) + ": bad label");
    }
    seq.frames.push_back(f);
    seq.labels.push_back(state_from_index(code));
  }
  validate(seq);
  return seq;
}

void save_sequence(const std::filesystem::path& path, const LabeledSequence& seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_failure, "cannot write " + path.string());
  write_sequence(out, seq);
  if (!out) fail(ErrorCode::io_failure, "write failed for " + path.string());
}

LabeledSequence load_sequence(const std::filesystem::path& path, Origin origin) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_failure, "cannot read " + path.string());
  return read_sequence(in, origin, path.stem().string());
}

std::vector<std::filesystem::path> save_dataset(const std::filesystem::path& dir, const std::string& prefix,
                                                const std::vector<LabeledSequence>& seqs) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "_%03zu", i);
    auto path = dir / (prefix + name + kSequenceExtension);
    save_sequence(path, seqs[i]);
    paths.push_back(std::move(path));
  }
  return paths;
}

std::vector<LabeledSequence> load_dataset(const std::filesystem::path& path, Origin origin) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::io_failure, "no such file or directory: " + path.string());
  if (!std::filesystem::is_directory(path)) return {load_sequence(path, origin)};
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(path)) {
    if (entry.is_regular_file() && entry.path().extension() == kSequenceExtension) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorCode::empty_dataset, "no " + std::string(kSequenceExtension) + " files in " + path.string());
  std::vector<LabeledSequence> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_sequence(f, origin));
  return out;
}

}  // namespace loadcycle::core
