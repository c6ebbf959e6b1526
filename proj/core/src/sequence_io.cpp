#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "jeanie/error.hpp"
#include "jeanie/io.hpp"

namespace jeanie::io {

namespace {

[[noreturn]] void parse_fail(std::string_view source, std::size_t line, const std::string& what) {
  fail(ErrorKind::Parse, std::string(source) + ":" + std::to_string(line) + ": " + what);
}

std::string_view trim_eol(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::size_t header_size(const nlohmann::json& h, const char* key, std::string_view source) {
  if (!h.contains(key)) parse_fail(source, 1, std::string("header lacks \"") + key + "\"");
  const auto& v = h.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    parse_fail(source, 1, std::string("\"") + key + "\" must be a nonnegative integer");
  return static_cast<std::size_t>(v.get<long long>());
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

SkeletonSequence parse_sequence_text(std::string_view text, std::string_view source) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& out) {
    if (pos >= text.size()) return false;
    const std::size_t end = text.find('\n', pos);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    out = trim_eol(text.substr(pos, stop - pos));
    pos = stop + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || line.empty()) parse_fail(source, 1, "missing JSON header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    parse_fail(source, 1, std::string("bad JSON header: ") + e.what());
  }
  if (!header.is_object()) parse_fail(source, 1, "header must be a JSON object");
  for (const auto& item : header.items()) {
    if (item.key() != "joints" && item.key() != "hip_index" && item.key() != "fps")
      parse_fail(source, 1, "unknown header field \"" + item.key() + "\"");
  }
  const std::size_t joints = header_size(header, "joints", source);
  const std::size_t hip = header_size(header, "hip_index", source);
  if (joints == 0) parse_fail(source, 1, "\"joints\" must be positive");
  require(hip < joints, ErrorKind::Layout, std::string(source) + ":1: hip_index out of range");
  std::optional<double> fps;
  if (header.contains("fps")) {
    if (!header["fps"].is_number() || !(header["fps"].get<double>() > 0.0))
      parse_fail(source, 1, "\"fps\" must be a positive number");
    fps = header["fps"].get<double>();
  }

  const std::size_t width = 3 * joints;
  std::vector<double> values;
  std::size_t frames = 0;
  while (next_line(line)) {
    if (line.empty()) continue;
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      double v = 0.0;
      const auto r = std::from_chars(p, end, v);
      if (r.ec != std::errc() || r.ptr == p)
        parse_fail(source, line_no, "expected a number in column " + std::to_string(count + 1));
      if (!std::isfinite(v))
        parse_fail(source, line_no, "non-finite value in column " + std::to_string(count + 1));
      values.push_back(v);
      ++count;
      p = r.ptr;
      if (p == end) break;
      if (*p != ',') parse_fail(source, line_no, "expected ',' after column " + std::to_string(count));
      ++p;
    }
    if (count != width) {
      parse_fail(source, line_no,
                 "expected " + std::to_string(width) + " values, found " + std::to_string(count));
    }
    ++frames;
  }
  if (frames == 0) parse_fail(source, line_no, "no frames");

  SkeletonSequence seq(frames, joints, hip, fps);
  std::copy(values.begin(), values.end(), seq.values().begin());
  return seq;
}

SkeletonSequence parse_sequence(const std::string& path) {
  return parse_sequence_text(read_file(path), path);
}

std::string format_sequence(const SkeletonSequence& seq) {
  nlohmann::json header;
  header["joints"] = seq.joints();
  header["hip_index"] = seq.hip_index();
  if (seq.fps()) header["fps"] = *seq.fps();
  std::string out = header.dump();
  out += '\n';
  for (std::size_t f = 0; f < seq.frames(); ++f) {
    const auto row = seq.frame_values(f);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

void write_sequence(const SkeletonSequence& seq, const std::string& path) {
  write_file(path, format_sequence(seq));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path);
}

}  // namespace jeanie::io
