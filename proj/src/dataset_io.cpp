#include "sgmcmc/dataset_io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "sgmcmc/errors.hpp"

namespace sgmcmc
{
namespace
{
using nlohmann::json;

std::ofstream open_out(const std::filesystem::path& path)
{
    if (path.has_parent_path())
    {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.precision(17);
    return out;
}

std::vector<double> split_numbers(const std::string& line, const std::filesystem::path& path,
                                  std::size_t line_no)
{
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
    {
        try
        {
            std::size_t used = 0;
            values.push_back(std::stod(cell, &used));
        }
        catch (const std::exception&)
        {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": not a number: '"
                          + cell + "'");
        }
    }
    return values;
}

} // namespace

void write_dataset(const std::filesystem::path& stem, const Model& model,
                   const DatasetMetadata& meta)
{
    auto csv_path = std::filesystem::path(stem).replace_extension(".csv");
    auto json_path = std::filesystem::path(stem).replace_extension(".json");
    auto csv = open_out(csv_path);
    json sidecar;
    sidecar["seed"] = meta.seed;

    if (const auto* g = std::get_if<GaussianLocationModel>(&model))
    {
        csv << "x\n";
        for (double x : g->data())
        {
            csv << x << '\n';
        }
        sidecar["kind"] = "gaussian";
        sidecar["sigma_x"] = g->sigma_x();
        sidecar["sigma_theta"] = g->sigma_theta();
        if (meta.theta_true)
        {
            sidecar["theta_true"] = *meta.theta_true;
        }
    }
    else
    {
        const auto& l = std::get<LogisticRegressionModel>(model);
        int d = l.dimension();
        csv << 'y';
        for (int j = 1; j <= d; ++j)
        {
            csv << ",x" << j;
        }
        csv << '\n';
        for (std::size_t i = 0; i < l.size(); ++i)
        {
            csv << l.labels()[i];
            for (int j = 0; j < d; ++j)
            {
                csv << ',' << l.covariates()(static_cast<Eigen::Index>(i), j);
            }
            csv << '\n';
        }
        std::vector<double> cov;
        for (int r = 0; r < d; ++r)
        {
            for (int c = 0; c < d; ++c)
            {
                cov.push_back(l.prior_covariance()(r, c));
            }
        }
        sidecar["kind"] = "logistic";
        sidecar["dimension"] = d;
        sidecar["prior_covariance"] = cov;
        if (meta.generating_theta)
        {
            sidecar["generating_theta"] = std::vector<double>(
                meta.generating_theta->data(),
                meta.generating_theta->data() + meta.generating_theta->size());
        }
    }
    if (!csv)
    {
        throw IoError("write failed for " + csv_path.string());
    }
    auto js = open_out(json_path);
    js << sidecar.dump(2) << '\n';
    if (!js)
    {
        throw IoError("write failed for " + json_path.string());
    }
}

LoadedDataset read_dataset(const std::filesystem::path& csv_path)
{
    auto json_path = std::filesystem::path(csv_path).replace_extension(".json");
    std::ifstream js(json_path);
    if (!js)
    {
        throw IoError("cannot open dataset sidecar " + json_path.string());
    }
    json sidecar;
    try
    {
        js >> sidecar;
    }
    catch (const json::exception& e)
    {
        throw IoError(json_path.string() + ": " + e.what());
    }
    std::ifstream csv(csv_path);
    if (!csv)
    {
        throw IoError("cannot open dataset " + csv_path.string());
    }
    std::string line;
    std::getline(csv, line);
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(csv, line))
    {
        ++line_no;
        if (line.empty())
        {
            continue;
        }
        rows.push_back(split_numbers(line, csv_path, line_no));
    }

    LoadedDataset out{GaussianLocationModel({0.0}, 1, 1), {}};
    try
    {
        out.meta.kind = sidecar.at("kind").get<std::string>();
        out.meta.seed = sidecar.value("seed", std::uint64_t{0});
        if (out.meta.kind == "gaussian")
        {
            std::vector<double> data;
            for (const auto& r : rows)
            {
                if (r.size() != 1)
                {
                    throw IoError(csv_path.string() + ": expected one column");
                }
                data.push_back(r[0]);
            }
            if (sidecar.contains("theta_true"))
            {
                out.meta.theta_true = sidecar["theta_true"].get<double>();
            }
            out.model = GaussianLocationModel(std::move(data), sidecar.at("sigma_x").get<double>(),
                                              sidecar.at("sigma_theta").get<double>());
        }
        else if (out.meta.kind == "logistic")
        {
            int d = sidecar.at("dimension").get<int>();
            auto cov = sidecar.at("prior_covariance").get<std::vector<double>>();
            if (cov.size() != static_cast<std::size_t>(d * d))
            {
                throw IoError(json_path.string() + ": prior_covariance must have d*d entries");
            }
            RowMatrix x(static_cast<Eigen::Index>(rows.size()), d);
            std::vector<double> y;
            for (std::size_t i = 0; i < rows.size(); ++i)
            {
                if (rows[i].size() != static_cast<std::size_t>(d + 1))
                {
                    throw IoError(csv_path.string() + ": row " + std::to_string(i + 2)
                                  + " has the wrong number of columns");
                }
                y.push_back(rows[i][0]);
                for (int j = 0; j < d; ++j)
                {
                    x(static_cast<Eigen::Index>(i), j) = rows[i][j + 1];
                }
            }
            Matrix c(d, d);
            for (int r = 0; r < d; ++r)
            {
                for (int k = 0; k < d; ++k)
                {
                    c(r, k) = cov[static_cast<std::size_t>(r * d + k)];
                }
            }
            if (sidecar.contains("generating_theta"))
            {
                auto t = sidecar["generating_theta"].get<std::vector<double>>();
                out.meta.generating_theta = Eigen::Map<Vector>(t.data(), static_cast<Eigen::Index>(t.size()));
            }
            out.model = LogisticRegressionModel(std::move(x), std::move(y), std::move(c));
        }
        else
        {
            throw IoError(json_path.string() + ": unknown dataset kind '" + out.meta.kind + "'");
        }
    }
    catch (const json::exception& e)
    {
        throw IoError(json_path.string() + ": " + e.what());
    }
    return out;
}

} // namespace sgmcmc
