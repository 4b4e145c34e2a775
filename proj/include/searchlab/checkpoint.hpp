#pragma once

// Flat binary checkpoint: a text header (model metadata and one line per
// tensor: name, shape, element offset) followed by little-endian 64-bit
// float data. Optimizer state rides in the same container under "optim."
// tensor names.

#include <string>
#include <vector>

#include "searchlab/model.hpp"

namespace searchlab {

struct NamedTensor {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<double> data;
};

void save_tensors(const std::string& path, const json& meta, const std::vector<NamedTensor>& tensors);

struct CheckpointContents {
    json meta;
    std::vector<NamedTensor> tensors;

    const NamedTensor* find(const std::string& name) const;
};

CheckpointContents load_tensors(const std::string& path);

// Model-level wrappers. Extra tensors (optimizer state) are appended
// verbatim; load_model checks the layout matches the stored architecture.
void save_model(const std::string& path, const ModelParams& params,
                const std::vector<NamedTensor>& extra = {});
ModelParams load_model(const std::string& path);
ModelParams load_model(const CheckpointContents& contents);

}  // namespace searchlab
