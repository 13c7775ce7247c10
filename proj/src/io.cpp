#include "guidekit/io.hpp"

#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "guidekit/error.hpp"

namespace guidekit {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::MissingFile, "no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

std::vector<Json> parse_jsonl(std::string_view text,
                              std::string_view source_name) {
  std::vector<Json> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    try {
      records.push_back(Json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::Parse, std::string(source_name) + ":" +
                                        std::to_string(line_no) + ": " +
                                        e.what());
    }
    if (end == text.size()) break;
  }
  return records;
}

std::vector<Json> read_jsonl(const fs::path& path) {
  return parse_jsonl(read_file(path), path.string());
}

void write_jsonl(const fs::path& path, const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out.push_back('\n');
  }
  write_file(path, out);
}

Json read_json(const fs::path& path) {
  const auto text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& value) {
  write_file(path, value.dump(2) + "\n");
}

namespace {
std::mutex g_log_mutex;
LogSink g_log_sink;
}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard lock(g_log_mutex);
  g_log_sink = std::move(sink);
}

void log_warning(std::string_view message) {
  std::lock_guard lock(g_log_mutex);
  if (g_log_sink) {
    g_log_sink(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

}  // namespace guidekit
