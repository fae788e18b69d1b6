#pragma once

#include "derids/types.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace derids {

/// Reads a dataset CSV.
///
/// Header is `p_L,q_L,p_Dmax,p` (unlabeled) or `p_L,q_L,p_Dmax,p,y` (labeled).
/// Any number of feature columns may precede `p`; the constant intercept
/// column is prepended on load unless the first header field is `intercept`,
/// in which case it is read and must equal 1. Throws ParseError (with line),
/// SchemaError or IoError.
Dataset load_dataset(const std::filesystem::path& path, DatasetKind kind);

/// As load_dataset, taking the kind from the presence of a trailing `y` column.
Dataset load_dataset(const std::filesystem::path& path);

/// Writes with 17 significant digits so finite values round-trip bit-exactly.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

void save_index_set(const std::vector<std::size_t>& indices, const std::filesystem::path& path);
std::vector<std::size_t> load_index_set(const std::filesystem::path& path);

/// Shortest-safe decimal for a double (17 significant digits).
std::string format_double(double value);

/// Writes `text` to `path`, creating parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace derids
