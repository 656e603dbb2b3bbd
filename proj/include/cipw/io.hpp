#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "json.hpp"

#include "cipw/harness.hpp"
#include "cipw/oracle.hpp"
#include "cipw/partition_finder.hpp"

namespace cipw {

using Json = nlohmann::json;

std::string version_string();

Norm parse_norm(const std::string& s);

Json to_json(const FiniteDistribution& dist);
FiniteDistribution distribution_from_json(const Json& j);

// {sets, null, weights?: [{x, set, w}]}; set = -1 names the null set.
Json to_json(const Partition& part);
Json to_json(const FractionalPartition& fpart);
struct PartitionFile {
    Partition hard;
    std::optional<FractionalPartition> fractional;  // present when weights are given
};
PartitionFile partition_from_json(const Json& j, Index m);

// header x1..xd,y,t[,e_hat]
struct CsvData {
    CensoredDataset data;
    std::optional<Eigen::VectorXd> e_hat;  // per row
};
CsvData read_csv(std::istream& in);
void write_csv(std::ostream& out, const CensoredDataset& data, const Eigen::VectorXd* e_hat = nullptr);
// Per-row scores folded onto ids; rows sharing an id must agree.
PropensityMap scores_from_rows(const CensoredDataset& data, const Eigen::VectorXd& e_hat);

Json to_json(const MinRmseInstance& inst);
Json to_json(const McReport& r);
Json to_json(const MomentReport& r);
Json to_json(const FinderResult& r);
Json to_json(const NormalityReport& r);

Json read_json_file(const std::string& path);
FiniteDistribution load_distribution(const std::string& path);
CsvData load_csv(const std::string& path);

// 16 hex digits of a 64-bit FNV-1a hash over the canonical dump
std::string config_hash(const Json& config);

} // namespace cipw
