#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gsim {

/// Shortest round-trip decimal form ("0.5", "1e-09", "nan").
[[nodiscard]] std::string format_number(double value);
/// Fixed significant digits, e.g. format_sig(0.79312, 3) == "0.793".
[[nodiscard]] std::string format_sig(double value, int digits);

[[nodiscard]] std::string csv_field(std::string_view text);
[[nodiscard]] std::string csv_row(const std::vector<std::string>& fields);

[[nodiscard]] std::vector<std::string> split(std::string_view text, char sep);
[[nodiscard]] std::string_view trim(std::string_view text) noexcept;

void write_file(const std::string& path, std::string_view content);
[[nodiscard]] std::string read_file(const std::string& path);

} // namespace gsim
