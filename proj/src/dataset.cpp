#include "dabc/dataset.hpp"

#include "dabc/errors.hpp"
#include "dabc/image_io.hpp"
#include "dabc/random.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

namespace fs = std::filesystem;

namespace dabc {

namespace {

constexpr const char* kRgbSuffix = ".rgb.png";
constexpr const char* kDepthSuffix = ".depth.pfm";

bool strip_suffix(const std::string& name, const std::string& suffix, std::string& stem)
{
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
        return false;
    stem = name.substr(0, name.size() - suffix.size());
    return true;
}

std::vector<Batch> cut(std::vector<SampleRef> order, int batch_size)
{
    std::vector<Batch> batches;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + i, order.begin() + end);
    }
    return batches;
}

std::vector<SampleRef> shuffled(const std::vector<SampleRef>& items, std::uint64_t seed, int epoch)
{
    std::vector<SampleRef> order = items;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<SampleRef>(order));
    return order;
}

} // namespace

std::vector<SceneSample> load_folder_dataset(const std::string& root, Domain domain)
{
    if (!fs::is_directory(root))
        throw IngestionError("dataset folder not found: " + root);

    std::map<std::string, std::pair<fs::path, fs::path>> pairs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_regular_file())
            continue;
        const std::string name = entry.path().filename().string();
        std::string id;
        if (strip_suffix(name, kRgbSuffix, id))
            pairs[id].first = entry.path();
        else if (strip_suffix(name, kDepthSuffix, id))
            pairs[id].second = entry.path();
    }

    std::vector<SceneSample> samples;
    samples.reserve(pairs.size());
    for (const auto& [id, files] : pairs) {
        if (files.first.empty())
            throw IngestionError("missing RGB file for depth map: " + files.second.string());
        if (files.second.empty())
            throw IngestionError("missing depth file for image: " + files.first.string());

        SceneSample s;
        s.id = id;
        s.domain = domain;
        s.rgb = read_png(files.first.string());
        const Grid<float> raw = read_pfm(files.second.string());
        if (!raw.same_shape(s.rgb.height, s.rgb.width))
            throw IngestionError("depth size does not match image: " + files.second.string());
        s.depth = DepthMap(raw.height, raw.width);
        s.valid = ValidMask(raw.height, raw.width);
        for (std::size_t k = 0; k < raw.size(); ++k) {
            const float d = raw.data[k];
            if (std::isfinite(d) && d > 0.0f) {
                s.depth.data[k] = d;
                s.valid.data[k] = 1;
            }
        }
        if (count_valid(s.valid) == 0)
            throw IngestionError("depth map has no valid pixels: " + files.second.string());
        samples.push_back(std::move(s));
    }
    return samples;
}

void save_sample(const SceneSample& sample, const std::string& root)
{
    check_sample(sample);
    fs::create_directories(root);
    const fs::path base = fs::path(root) / sample.id;
    write_png(sample.rgb, base.string() + kRgbSuffix);
    DepthMap depth = sample.depth;
    for (std::size_t k = 0; k < depth.size(); ++k)
        if (!sample.valid.data[k])
            depth.data[k] = 0.0;
    write_pfm(depth, base.string() + kDepthSuffix);
}

void save_folder_dataset(const std::vector<SceneSample>& samples, const std::string& root)
{
    fs::create_directories(root);
    for (const auto& s : samples)
        save_sample(s, root);
}

MixedBatchSampler::MixedBatchSampler(std::size_t indoor_count, std::size_t outdoor_count, int batch_size,
                                     std::uint64_t seed)
    : batch_size_(batch_size), seed_(seed)
{
    if (indoor_count == 0 || outdoor_count == 0)
        throw ParameterError("mixed sampler needs non-empty indoor and outdoor sets");
    if (batch_size < 1)
        throw ParameterError("batch size must be positive");
    for (std::size_t i = 0; i < indoor_count; ++i)
        items_.push_back({Domain::indoor, i});
    for (std::size_t i = 0; i < outdoor_count; ++i)
        items_.push_back({Domain::outdoor, i});
}

std::vector<Batch> MixedBatchSampler::epoch(int index) const
{
    return cut(shuffled(items_, seed_, index), batch_size_);
}

std::size_t MixedBatchSampler::batches_per_epoch() const
{
    return (items_.size() + batch_size_ - 1) / batch_size_;
}

DomainBatchSampler::DomainBatchSampler(Domain domain, std::size_t count, int batch_size, std::uint64_t seed)
    : batch_size_(batch_size), seed_(seed)
{
    if (count == 0)
        throw ParameterError("sampler needs a non-empty set");
    if (batch_size < 1)
        throw ParameterError("batch size must be positive");
    for (std::size_t i = 0; i < count; ++i)
        items_.push_back({domain, i});
}

std::vector<Batch> DomainBatchSampler::epoch(int index) const
{
    return cut(shuffled(items_, seed_, index), batch_size_);
}

std::size_t DomainBatchSampler::batches_per_epoch() const
{
    return (items_.size() + batch_size_ - 1) / batch_size_;
}

} // namespace dabc
