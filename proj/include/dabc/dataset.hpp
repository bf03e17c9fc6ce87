#pragma once

#include "dabc/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dabc {

/// Reads `<root>/<id>.rgb.png` + `<id>.depth.pfm` pairs, sorted by id. Non-positive depths
/// become invalid. Throws IngestionError naming the file for a missing partner, a malformed
/// file, mismatched sizes, or a depth map without any valid pixel.
std::vector<SceneSample> load_folder_dataset(const std::string& root, Domain domain);

/// Writes one sample in the folder layout; invalid pixels are stored as 0.
void save_sample(const SceneSample& sample, const std::string& root);
void save_folder_dataset(const std::vector<SceneSample>& samples, const std::string& root);

struct SampleRef
{
    Domain domain = Domain::indoor;
    std::size_t index = 0;

    bool operator==(const SampleRef&) const = default;
};

using Batch = std::vector<SampleRef>;

/// Each epoch is an independent seeded shuffle of the union of both sets, cut into batches
/// of `batch_size` (the last one may be short). Every sample appears once per epoch, so the
/// domain ratio of the sets is kept exactly per epoch.
class MixedBatchSampler
{
public:
    /// Throws ParameterError if either set is empty or batch_size < 1.
    MixedBatchSampler(std::size_t indoor_count, std::size_t outdoor_count, int batch_size, std::uint64_t seed);

    std::vector<Batch> epoch(int index) const;
    std::size_t size() const { return items_.size(); }
    std::size_t batches_per_epoch() const;

private:
    std::vector<SampleRef> items_;
    int batch_size_;
    std::uint64_t seed_;
};

/// Single-domain variant of the same stream, used for the same-dataset baselines.
class DomainBatchSampler
{
public:
    DomainBatchSampler(Domain domain, std::size_t count, int batch_size, std::uint64_t seed);

    std::vector<Batch> epoch(int index) const;
    std::size_t batches_per_epoch() const;

private:
    std::vector<SampleRef> items_;
    int batch_size_;
    std::uint64_t seed_;
};

} // namespace dabc
