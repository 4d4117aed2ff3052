#pragma once

#include <string>
#include <vector>

#include "barecam/image.hpp"

namespace barecam::testfix {

// Procedurally generated 10-class color corpus in the CIFAR-10 record shape
// (32x32x3, labels 0..9). Each class places a bright blob at a class-specific
// angle near the image center and overlays a class-oriented grating; a random
// distractor blob and pixel noise provide within-class variation. Cues sit
// close to the center because the bare-sensor geometry weights the display
// center most strongly.
std::vector<LabeledImage> make_synthetic_corpus(int per_class, uint64_t seed);

// Writes the corpus as a single CIFAR-10 binary batch file.
void write_cifar_batch(const std::vector<LabeledImage>& images, const std::string& path);

}  // namespace barecam::testfix
