// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace claimcheck {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Calls `on_record` for every non-blank line that parses as JSON and
// `on_error(line_number, message)` for lines that do not. Throws
// std::runtime_error if the file cannot be opened.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t line_no, Json record)>& on_record,
                    const std::function<void(std::size_t line_no, std::string_view error)>& on_error);

// Writes to `<path>.tmp` and renames over `path` on commit(). Abandoned
// writers remove their temp file.
class AtomicFileWriter {
 public:
  explicit AtomicFileWriter(std::filesystem::path path);
  ~AtomicFileWriter();

  AtomicFileWriter(const AtomicFileWriter&) = delete;
  AtomicFileWriter& operator=(const AtomicFileWriter&) = delete;

  std::ostream& stream() { return out_; }
  void write_line(std::string_view line);
  void commit();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

// JSON string literal for `s`; invalid UTF-8 is replaced, never thrown.
std::string json_quote(std::string_view s);

// Compact dump that tolerates invalid UTF-8.
std::string dump_compact(const Json& j);
std::string dump_compact(const OrderedJson& j);

void write_text_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace claimcheck
