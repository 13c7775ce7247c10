#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace guidekit {

using Json = nlohmann::ordered_json;

[[nodiscard]] std::string read_file(const std::filesystem::path& path);

/// Writes atomically enough for our purposes: parent directories are
/// created and the file is replaced in one write.
void write_file(const std::filesystem::path& path, std::string_view content);

/// One JSON value per non-blank line. Parse errors name the line number.
[[nodiscard]] std::vector<Json> read_jsonl(const std::filesystem::path& path);
[[nodiscard]] std::vector<Json> parse_jsonl(std::string_view text,
                                            std::string_view source_name);

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<Json>& records);

[[nodiscard]] Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& value);

// Warnings go to stderr unless a sink is installed (tests capture them).
using LogSink = std::function<void(std::string_view)>;
void set_log_sink(LogSink sink);
void log_warning(std::string_view message);

}  // namespace guidekit
