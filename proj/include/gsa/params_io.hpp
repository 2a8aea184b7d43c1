#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsa/attention.hpp"
#include "gsa/tensor.hpp"
#include "gsa/tensor_io.hpp"

namespace gsa {

/**
 * Parameter bundle: a directory holding one GSAT file per array and a
 * `manifest.json` of the form
 *
 *   {"format": "gsa-param-bundle", "version": 1,
 *    "parameters": [{"name": "group2.block1.gsa.W_Q", "file": "group2.block1.gsa.W_Q.gsat",
 *                    "shape": [128, 128], "dtype": "float64", "trainable": true}, ...]}
 *
 * Entries appear in the order of the ParamRef list that produced them.
 */
void save_bundle(const std::filesystem::path& dir, const std::vector<ParamRef>& params, Dtype dtype = Dtype::f64);

/// Copies every manifest entry into the matching ParamRef by name. Missing,
/// extra, or mis-shaped entries raise FormatError naming the parameter.
void load_bundle(const std::filesystem::path& dir, std::vector<ParamRef>& params);

nlohmann::json read_manifest(const std::filesystem::path& dir);

}  // namespace gsa
