#pragma once

#include <filesystem>
#include <string>

namespace fblin {

// SHA-1 of "blob <size>\0<content>", the content-address git would assign.
// Used to pin model files in run metadata.
std::string git_blob_sha1(const std::string& content);
std::string git_blob_sha1_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

// Shortest decimal form that round-trips a double ("%.17g" pruned).
std::string format_double(double v);

}  // namespace fblin
