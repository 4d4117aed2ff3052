#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "barecam/image.hpp"

namespace barecam::data {

// CIFAR-10 binary batch: N records of 3073 bytes (label, 1024 R, 1024 G,
// 1024 B, row-major 32x32). Labels must be <= 9.
std::vector<LabeledImage> load_cifar_binary(const std::string& path);

// Binary PPM ingestion for non-CIFAR corpora; the label comes from the caller.
LabeledImage load_ppm(const std::string& path, int label);

// Bilinear resize, edge clamped, sample centers at (i + 0.5) * scale - 0.5,
// rounded half away from zero back to 8 bits.
ImageU8 resize_bilinear(const ImageU8& img, int out_h, int out_w);

// ITU-R 601-2 luma: L = 0.299 R + 0.587 G + 0.114 B.
ImageU8 to_grayscale_luma(const ImageU8& img);

// One example inside a split: index into the source image list plus which
// duplicate this is (0 for originals, >= 1 for oversampled copies).
struct SplitEntry {
    int source_index = 0;
    uint8_t label = 0;  // binary label
    int duplicate = 0;
};

struct DetectionSplit {
    std::vector<SplitEntry> train;
    std::vector<SplitEntry> val;
    std::vector<SplitEntry> test;
    int positive_class = -1;   // original class id; -1 for two-class splits
    int oversample_rate = 1;
};

struct SplitSizes {
    int train = 0;
    int val = 0;
    int test = 0;
};

// Class-stratified seeded partition into train/val/test source indices. The
// result depends only on (labels, sizes, seed), so relabeling a class keeps
// the same membership and order.
struct IndexSplit {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};
IndexSplit make_stratified_split(const std::vector<LabeledImage>& images,
                                 SplitSizes sizes, uint64_t seed);

// Stratified seeded split with labels mapped to 1 for the positive class and
// 0 for the merged rest. Original class proportions are preserved per split.
DetectionSplit make_detection_split(const std::vector<LabeledImage>& images,
                                    int positive_class, SplitSizes sizes,
                                    uint64_t seed);

// Duplicates each positive training example so positives appear `rate` times,
// then reshuffles the training list. Val and test are untouched.
DetectionSplit oversample_minority(const DetectionSplit& split, int rate, uint64_t seed);

// Balanced two-class split; class_a maps to label 0, class_b to label 1.
DetectionSplit make_binary_split(const std::vector<LabeledImage>& images,
                                 int class_a, int class_b, SplitSizes sizes,
                                 uint64_t seed);

// Line-oriented manifest: source index, split name, binary label, duplicate
// ordinal, one example per line.
std::string split_manifest(const DetectionSplit& split);
DetectionSplit parse_split_manifest(const std::string& text);

}  // namespace barecam::data
