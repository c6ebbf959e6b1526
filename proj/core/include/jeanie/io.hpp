#pragma once

#include <string>
#include <string_view>

#include "jeanie/skeleton.hpp"

namespace jeanie::io {

/// Sequence file grammar:
///
///   line 1   JSON object {"joints": J, "hip_index": h[, "fps": f]}
///   line 2+  one frame per line: 3J comma-separated decimals
///            x_0,y_0,z_0,x_1,...,z_{J-1}
///
/// Lines end with '\n' ('\r\n' is accepted). Empty lines are skipped.
/// Numbers are written in shortest round-trip form, so parse(format(s))
/// reproduces s bit for bit and format(parse(text)) == text for files
/// produced by the writer.
SkeletonSequence parse_sequence_text(std::string_view text, std::string_view source = "<input>");
SkeletonSequence parse_sequence(const std::string& path);

std::string format_sequence(const SkeletonSequence& seq);
void write_sequence(const SkeletonSequence& seq, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Shortest decimal that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace jeanie::io
