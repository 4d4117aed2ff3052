#include "barecam/infoloss.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "barecam/textio.hpp"

namespace barecam::info {

double image_entropy(const ImageU8& img, int bins) {
    if (img.data.empty()) throw DomainError("image_entropy: empty image");
    if (bins < 2 || bins > 256) throw DomainError("image_entropy: bins must be in [2, 256]");

    const size_t plane = img.plane();
    const double n = static_cast<double>(plane);
    double sum = 0.0;
    std::array<uint32_t, 256> hist;
    for (int c = 0; c < img.channels; ++c) {
        hist.fill(0);
        const uint8_t* p = img.data.data() + plane * c;
        for (size_t i = 0; i < plane; ++i) ++hist[(static_cast<int>(p[i]) * bins) >> 8];
        double h = 0.0;
        for (int b = 0; b < bins; ++b) {
            if (hist[b] == 0) continue;
            const double prob = hist[b] / n;
            h -= prob * std::log2(prob);
        }
        sum += h;
    }
    return sum / img.channels;
}

EntropyReport information_loss(const std::vector<ImageU8>& gt_set,
                               const std::vector<ImageU8>& sensor_set, int bins) {
    if (gt_set.size() != sensor_set.size())
        throw ShapeError("information_loss: set sizes differ (" +
                         std::to_string(gt_set.size()) + " vs " +
                         std::to_string(sensor_set.size()) + ")");
    EntropyReport rep;
    rep.per_image_entropy_gt.reserve(gt_set.size());
    rep.per_image_entropy_sensor.reserve(gt_set.size());
    double acc = 0.0;
    int counted = 0;
    for (size_t i = 0; i < gt_set.size(); ++i) {
        const double hg = image_entropy(gt_set[i], bins);
        const double hs = image_entropy(sensor_set[i], bins);
        rep.per_image_entropy_gt.push_back(hg);
        rep.per_image_entropy_sensor.push_back(hs);
        if (hg == 0.0) {
            ++rep.excluded_zero_entropy;
            continue;
        }
        acc += std::abs(hg - hs) / hg;
        ++counted;
    }
    rep.mean_relative_loss = counted > 0 ? acc / counted : 0.0;
    return rep;
}

std::string EntropyReport::to_text() const {
    std::ostringstream os;
    for (size_t i = 0; i < per_image_entropy_gt.size(); ++i) {
        const double hg = per_image_entropy_gt[i];
        const double hs = per_image_entropy_sensor[i];
        os << i << '\t' << format_double(hg) << '\t' << format_double(hs) << '\t';
        if (hg == 0.0)
            os << "excluded";
        else
            os << format_double(std::abs(hg - hs) / hg);
        os << '\n';
    }
    os << "# images=" << per_image_entropy_gt.size()
       << " excluded=" << excluded_zero_entropy
       << " mean_relative_loss=" << format_double(mean_relative_loss) << '\n';
    return os.str();
}

}  // namespace barecam::info
