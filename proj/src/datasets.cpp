#include "barecam/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "barecam/rng.hpp"

namespace barecam::data {

namespace {
constexpr size_t kCifarRecordBytes = 3073;
constexpr int kCifarDim = 32;
}  // namespace

std::vector<LabeledImage> load_cifar_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path);
    is.seekg(0, std::ios::end);
    const auto bytes = static_cast<size_t>(is.tellg());
    is.seekg(0, std::ios::beg);
    if (bytes == 0 || bytes % kCifarRecordBytes != 0)
        throw FormatError(path + ": size " + std::to_string(bytes) +
                          " is not a multiple of 3073");

    const size_t n = bytes / kCifarRecordBytes;
    std::vector<LabeledImage> out;
    out.reserve(n);
    std::vector<uint8_t> rec(kCifarRecordBytes);
    for (size_t i = 0; i < n; ++i) {
        is.read(reinterpret_cast<char*>(rec.data()), kCifarRecordBytes);
        if (!is) throw FormatError(path + ": truncated record " + std::to_string(i));
        if (rec[0] > 9)
            throw FormatError(path + ": record " + std::to_string(i) + " has label " +
                              std::to_string(rec[0]));
        LabeledImage li;
        li.label = rec[0];
        li.image = ImageU8(3, kCifarDim, kCifarDim);
        std::copy(rec.begin() + 1, rec.end(), li.image.data.begin());
        out.push_back(std::move(li));
    }
    return out;
}

LabeledImage load_ppm(const std::string& path, int label) {
    LabeledImage li;
    li.image = read_ppm(path);
    li.label = label;
    return li;
}

ImageU8 resize_bilinear(const ImageU8& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw DomainError("resize: output dims must be >= 1");
    ImageU8 out(img.channels, out_h, out_w);
    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        const double fy = (oy + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int y0c = std::clamp(y0, 0, img.height - 1);
        const int y1c = std::clamp(y0 + 1, 0, img.height - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = (ox + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int x0c = std::clamp(x0, 0, img.width - 1);
            const int x1c = std::clamp(x0 + 1, 0, img.width - 1);
            for (int c = 0; c < img.channels; ++c) {
                const double v00 = img.at(c, y0c, x0c);
                const double v01 = img.at(c, y0c, x1c);
                const double v10 = img.at(c, y1c, x0c);
                const double v11 = img.at(c, y1c, x1c);
                const double top = v00 + (v01 - v00) * wx;
                const double bot = v10 + (v11 - v10) * wx;
                out.at(c, oy, ox) = to_u8_clamped(top + (bot - top) * wy);
            }
        }
    }
    return out;
}

ImageU8 to_grayscale_luma(const ImageU8& img) {
    if (img.channels != 3) throw DomainError("luma transform needs a 3-channel image");
    ImageU8 out(1, img.height, img.width);
    const size_t plane = img.plane();
    const uint8_t* r = img.data.data();
    const uint8_t* g = r + plane;
    const uint8_t* b = g + plane;
    for (size_t i = 0; i < plane; ++i)
        out.data[i] = to_u8_clamped(0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i]);
    return out;
}

namespace {

// Allocates `want` examples per class from what is still available,
// largest-remainder so the split size is met exactly.
std::vector<int> allocate_stratified(const std::vector<int>& available, int want) {
    const long total = std::accumulate(available.begin(), available.end(), 0L);
    if (want > total) throw DomainError("split sizes exceed available images");
    const size_t k = available.size();
    std::vector<int> alloc(k, 0);
    std::vector<std::pair<double, size_t>> rem;
    long assigned = 0;
    for (size_t c = 0; c < k; ++c) {
        const double exact = total > 0 ? static_cast<double>(want) * available[c] / total : 0.0;
        alloc[c] = static_cast<int>(exact);
        assigned += alloc[c];
        rem.push_back({exact - alloc[c], c});
    }
    // Distribute the remainder by largest fraction, ties by class id.
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t i = 0; assigned < want; ++i) {
        const size_t c = rem[i % k].second;
        if (alloc[c] < available[c]) {
            ++alloc[c];
            ++assigned;
        }
    }
    return alloc;
}

struct StratifiedIndices {
    std::vector<std::vector<int>> train, val, test;  // per class
};

// Shuffles each class independently, then walks train/val/test allocations.
StratifiedIndices stratify(const std::vector<std::vector<int>>& by_class,
                           SplitSizes sizes, uint64_t seed) {
    const size_t k = by_class.size();
    std::vector<std::vector<int>> shuffled(by_class);
    for (size_t c = 0; c < k; ++c) {
        Rng rng(derive_seed(seed, "stratify", c));
        rng.shuffle(shuffled[c]);
    }
    std::vector<int> avail(k);
    for (size_t c = 0; c < k; ++c) avail[c] = static_cast<int>(shuffled[c].size());

    StratifiedIndices out;
    out.train.resize(k);
    out.val.resize(k);
    out.test.resize(k);
    std::vector<int> cursor(k, 0);
    for (auto [want, dest] : {std::pair{sizes.train, &out.train},
                              std::pair{sizes.val, &out.val},
                              std::pair{sizes.test, &out.test}}) {
        std::vector<int> remaining(k);
        for (size_t c = 0; c < k; ++c) remaining[c] = avail[c] - cursor[c];
        const auto alloc = allocate_stratified(remaining, want);
        for (size_t c = 0; c < k; ++c) {
            for (int i = 0; i < alloc[c]; ++i)
                (*dest)[c].push_back(shuffled[c][cursor[c] + i]);
            cursor[c] += alloc[c];
        }
    }
    return out;
}

std::vector<std::vector<int>> group_by_class(const std::vector<LabeledImage>& images,
                                             int num_classes) {
    std::vector<std::vector<int>> by_class(num_classes);
    for (size_t i = 0; i < images.size(); ++i) {
        const int lab = images[i].label;
        if (lab < 0 || lab >= num_classes)
            throw DomainError("label " + std::to_string(lab) + " out of range");
        by_class[lab].push_back(static_cast<int>(i));
    }
    return by_class;
}

void fill_split(std::vector<SplitEntry>& dest, const std::vector<std::vector<int>>& per_class,
                const std::vector<uint8_t>& class_to_label, uint64_t order_seed) {
    for (size_t c = 0; c < per_class.size(); ++c)
        for (int idx : per_class[c])
            dest.push_back({idx, class_to_label[c], 0});
    // Interleave classes deterministically so batches are mixed.
    Rng rng(order_seed);
    rng.shuffle(dest);
}

}  // namespace

IndexSplit make_stratified_split(const std::vector<LabeledImage>& images,
                                 SplitSizes sizes, uint64_t seed) {
    if (sizes.train < 0 || sizes.val < 0 || sizes.test < 0)
        throw DomainError("split sizes must be nonnegative");
    if (static_cast<size_t>(sizes.train) + sizes.val + sizes.test > images.size())
        throw DomainError("split sizes exceed dataset size");
    int num_classes = 0;
    for (const auto& li : images) num_classes = std::max(num_classes, li.label + 1);
    const auto by_class = group_by_class(images, num_classes);
    const auto strat = stratify(by_class, sizes, seed);

    IndexSplit out;
    auto flatten = [&](const std::vector<std::vector<int>>& per_class,
                       std::vector<int>& dest, const char* tag) {
        for (const auto& cls : per_class) dest.insert(dest.end(), cls.begin(), cls.end());
        Rng rng(derive_seed(seed, tag));
        rng.shuffle(dest);
    };
    flatten(strat.train, out.train, "order-train");
    flatten(strat.val, out.val, "order-val");
    flatten(strat.test, out.test, "order-test");
    return out;
}

DetectionSplit make_detection_split(const std::vector<LabeledImage>& images,
                                    int positive_class, SplitSizes sizes, uint64_t seed) {
    bool present = false;
    for (const auto& li : images) present |= li.label == positive_class;
    if (!present)
        throw DomainError("positive class " + std::to_string(positive_class) +
                          " absent from data");

    const IndexSplit idx = make_stratified_split(images, sizes, seed);
    DetectionSplit split;
    split.positive_class = positive_class;
    auto fill = [&](const std::vector<int>& src, std::vector<SplitEntry>& dest) {
        dest.reserve(src.size());
        for (int i : src)
            dest.push_back({i, static_cast<uint8_t>(images[i].label == positive_class), 0});
    };
    fill(idx.train, split.train);
    fill(idx.val, split.val);
    fill(idx.test, split.test);
    return split;
}

DetectionSplit oversample_minority(const DetectionSplit& split, int rate, uint64_t seed) {
    if (rate < 1) throw DomainError("oversample rate must be >= 1");
    DetectionSplit out = split;
    out.oversample_rate = rate;
    for (const auto& e : split.train) {
        if (e.label != 1) continue;
        for (int d = 1; d < rate; ++d) out.train.push_back({e.source_index, e.label, d});
    }
    Rng rng(derive_seed(seed, "oversample"));
    rng.shuffle(out.train);
    return out;
}

DetectionSplit make_binary_split(const std::vector<LabeledImage>& images, int class_a,
                                 int class_b, SplitSizes sizes, uint64_t seed) {
    if (class_a == class_b) throw DomainError("binary split needs two distinct classes");
    std::vector<int> idx_a, idx_b;
    for (size_t i = 0; i < images.size(); ++i) {
        if (images[i].label == class_a) idx_a.push_back(static_cast<int>(i));
        if (images[i].label == class_b) idx_b.push_back(static_cast<int>(i));
    }
    if (idx_a.empty()) throw DomainError("class " + std::to_string(class_a) + " absent");
    if (idx_b.empty()) throw DomainError("class " + std::to_string(class_b) + " absent");

    const auto strat = stratify({idx_a, idx_b}, sizes, seed);
    DetectionSplit split;
    split.positive_class = -1;
    const std::vector<uint8_t> labels = {0, 1};
    fill_split(split.train, strat.train, labels, derive_seed(seed, "order-train"));
    fill_split(split.val, strat.val, labels, derive_seed(seed, "order-val"));
    fill_split(split.test, strat.test, labels, derive_seed(seed, "order-test"));
    return split;
}

std::string split_manifest(const DetectionSplit& split) {
    std::ostringstream os;
    auto emit = [&os](const std::vector<SplitEntry>& v, const char* name) {
        for (const auto& e : v)
            os << e.source_index << '\t' << name << '\t' << int(e.label) << '\t'
               << e.duplicate << '\n';
    };
    emit(split.train, "train");
    emit(split.val, "val");
    emit(split.test, "test");
    return os.str();
}

DetectionSplit parse_split_manifest(const std::string& text) {
    DetectionSplit split;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        SplitEntry e;
        std::string name;
        int label = 0;
        if (!(ls >> e.source_index >> name >> label >> e.duplicate))
            throw FormatError("split manifest line " + std::to_string(lineno) + " malformed");
        e.label = static_cast<uint8_t>(label);
        if (name == "train")
            split.train.push_back(e);
        else if (name == "val")
            split.val.push_back(e);
        else if (name == "test")
            split.test.push_back(e);
        else
            throw FormatError("split manifest line " + std::to_string(lineno) +
                              ": unknown split '" + name + "'");
    }
    return split;
}

}  // namespace barecam::data
