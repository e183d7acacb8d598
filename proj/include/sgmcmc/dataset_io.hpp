#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "sgmcmc/models.hpp"

namespace sgmcmc
{

struct DatasetMetadata
{
    std::string kind;  //!< "gaussian" or "logistic"
    std::uint64_t seed = 0;
    std::optional<double> theta_true;       //!< Gaussian generating parameter
    std::optional<Vector> generating_theta; //!< logistic generating parameter
};

/*!
 * Writes <stem>.csv (header `x`, or `y,x1,...,xd`) and a JSON sidecar
 * <stem>.json with sigma_x/sigma_theta or prior_covariance (row-major) and seed.
 * Numbers are printed with 17 significant digits so a read-back is exact.
 */
void write_dataset(const std::filesystem::path& stem, const Model& model,
                   const DatasetMetadata& meta);

struct LoadedDataset
{
    Model model;
    DatasetMetadata meta;
};

//! Reads a dataset back from the CSV path; the sidecar is the same path with a .json extension.
LoadedDataset read_dataset(const std::filesystem::path& csv_path);

} // namespace sgmcmc
