#include "gateprune/mnist.hpp"

#include <zlib.h>

#include <cstring>

namespace gateprune {

namespace {

// gzread handles both gzip members and plain files transparently.
std::vector<unsigned char> read_file_maybe_gz(const std::filesystem::path& path) {
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f) throw FormatError("cannot open " + path.string());
    std::vector<unsigned char> bytes;
    unsigned char buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof(buf))) > 0) bytes.insert(bytes.end(), buf, buf + n);
    bool bad = n < 0;
    gzclose(f);
    if (bad) throw FormatError("decompression failed for " + path.string());
    return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off) {
    if (off + 4 > b.size()) throw FormatError("truncated IDX header");
    return (static_cast<std::uint32_t>(b[off]) << 24) | (static_cast<std::uint32_t>(b[off + 1]) << 16) |
           (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
}

std::filesystem::path find_idx_file(const std::filesystem::path& dir, const std::string& stem) {
    for (const char* suffix : {"", ".gz"}) {
        std::filesystem::path p = dir / (stem + suffix);
        if (std::filesystem::exists(p)) return p;
    }
    throw FormatError("missing IDX file " + (dir / stem).string() + "[.gz]");
}

}  // namespace

Dataset load_idx_dataset(const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path) {
    auto img = read_file_maybe_gz(images_path);
    std::uint32_t magic = read_be32(img, 0);
    if (magic != kIdxImageMagic)
        throw FormatError("bad image magic in " + images_path.string() + ": got " +
                          std::to_string(magic) + ", want " + std::to_string(kIdxImageMagic));
    const std::uint32_t n = read_be32(img, 4);
    const std::uint32_t rows = read_be32(img, 8);
    const std::uint32_t cols = read_be32(img, 12);
    const std::size_t pixels = static_cast<std::size_t>(n) * rows * cols;
    if (img.size() != 16 + pixels)
        throw FormatError("image payload length mismatch in " + images_path.string() + ": got " +
                          std::to_string(img.size() - 16) + " bytes, want " + std::to_string(pixels));

    auto lab = read_file_maybe_gz(labels_path);
    std::uint32_t lmagic = read_be32(lab, 0);
    if (lmagic != kIdxLabelMagic)
        throw FormatError("bad label magic in " + labels_path.string() + ": got " +
                          std::to_string(lmagic) + ", want " + std::to_string(kIdxLabelMagic));
    const std::uint32_t ln = read_be32(lab, 4);
    if (ln != n)
        throw FormatError("label count " + std::to_string(ln) + " does not match image count " +
                          std::to_string(n));
    if (lab.size() != 8 + ln)
        throw FormatError("label payload length mismatch in " + labels_path.string());

    Dataset d;
    d.images = Tensor::zeros({static_cast<int>(n), 1, static_cast<int>(rows), static_cast<int>(cols)});
    float* dst = d.images.data().data();
    const unsigned char* src = img.data() + 16;
    for (std::size_t i = 0; i < pixels; ++i)
        dst[i] = (static_cast<float>(src[i]) / 255.0f - kMnistMean) / kMnistStd;

    d.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) d.labels[i] = static_cast<int>(lab[8 + i]);
    return d;
}

std::pair<Dataset, Dataset> load_mnist(const std::filesystem::path& dir) {
    Dataset train = load_idx_dataset(find_idx_file(dir, "train-images-idx3-ubyte"),
                                     find_idx_file(dir, "train-labels-idx1-ubyte"));
    Dataset test = load_idx_dataset(find_idx_file(dir, "t10k-images-idx3-ubyte"),
                                    find_idx_file(dir, "t10k-labels-idx1-ubyte"));
    return {std::move(train), std::move(test)};
}

Dataset dataset_head(const Dataset& d, int n) {
    if (n <= 0 || n >= d.size()) return d;
    const std::size_t per = d.images.numel() / static_cast<std::size_t>(d.size());
    Dataset out;
    std::vector<int> shape = d.images.shape();
    shape[0] = n;
    out.images = Tensor::zeros(shape);
    std::memcpy(out.images.data().data(), d.images.data().data(),
                sizeof(float) * per * static_cast<std::size_t>(n));
    out.labels.assign(d.labels.begin(), d.labels.begin() + n);
    return out;
}

Tensor gather_images(const Dataset& d, std::span<const int> indices) {
    const std::size_t per = d.images.numel() / static_cast<std::size_t>(d.size());
    std::vector<int> shape = d.images.shape();
    shape[0] = static_cast<int>(indices.size());
    Tensor out = Tensor::zeros(shape);
    const float* src = d.images.data().data();
    float* dst = out.data().data();
    for (std::size_t i = 0; i < indices.size(); ++i)
        std::memcpy(dst + i * per, src + static_cast<std::size_t>(indices[i]) * per, sizeof(float) * per);
    return out;
}

std::vector<int> gather_labels(const Dataset& d, std::span<const int> indices) {
    std::vector<int> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) out[i] = d.labels[static_cast<std::size_t>(indices[i])];
    return out;
}

}  // namespace gateprune
