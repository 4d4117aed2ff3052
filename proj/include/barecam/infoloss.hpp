#pragma once

#include <string>
#include <vector>

#include "barecam/image.hpp"

namespace barecam::info {

// Shannon entropy of the intensity histogram, in bits. Multi-channel images
// report the mean of the per-channel entropies. bins must lie in [2, 256];
// bins are equal width over [0, 255].
double image_entropy(const ImageU8& img, int bins = 256);

struct EntropyReport {
    std::vector<double> per_image_entropy_gt;
    std::vector<double> per_image_entropy_sensor;
    double mean_relative_loss = 0.0;  // mean over images with H_gt > 0
    int excluded_zero_entropy = 0;

    std::string to_text() const;
};

// Per-image |H_gt - H_sensor| / H_gt averaged over the set. Images whose
// ground-truth entropy is zero are excluded from the mean and counted.
EntropyReport information_loss(const std::vector<ImageU8>& gt_set,
                               const std::vector<ImageU8>& sensor_set,
                               int bins = 256);

}  // namespace barecam::info
