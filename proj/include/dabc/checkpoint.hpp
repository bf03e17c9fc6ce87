#pragma once

#include "dabc/model.hpp"
#include "dabc/quantizer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dabc {

/// A parameter array as stored on disk: float32 values in NCHW order.
struct NamedArray
{
    std::string name;
    Shape shape;
    std::vector<float> values;

    bool operator==(const NamedArray&) const = default;
};

struct ScheduleState
{
    int epoch = 0;
    double lr = 0.0;

    bool operator==(const ScheduleState&) const = default;
};

/// Everything needed to rebuild a trained network.
///
/// File layout: the 8-byte magic "DABCCKPT", a little-endian u32 format version, a
/// little-endian u64 header length, the UTF-8 JSON header, then the raw little-endian
/// float32 payload. The header holds the model config, quantization, schedule state,
/// seed and, per array, its name, shape and byte offset into the payload.
struct Checkpoint
{
    ModelConfig model;
    QuantizationSpec quantization;
    ScheduleState schedule;
    std::uint64_t seed = 0;
    std::vector<NamedArray> parameters;
};

bool operator==(const Checkpoint& a, const Checkpoint& b);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
/// Throws IngestionError on a malformed file.
Checkpoint load_checkpoint(const std::string& path);

template <typename T>
Checkpoint capture_checkpoint(Model<T>& model, const QuantizationSpec& spec, ScheduleState schedule,
                              std::uint64_t seed);

/// Builds a model from the checkpoint's config and loads its parameters.
/// Throws ShapeError if any stored array does not match the config.
template <typename T>
Model<T> restore_model(const Checkpoint& ckpt);

/// Loads parameters into an existing model, validating names and shapes.
template <typename T>
void load_parameters(Model<T>& model, const Checkpoint& ckpt);

} // namespace dabc
