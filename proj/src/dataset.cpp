#include "distval/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>

namespace distval {

namespace {

void check_invariants(const Matrix& features, const Labels& labels, int num_classes) {
    const auto n = features.rows();
    const auto d = features.cols();
    if (n < 1) throw std::invalid_argument("dataset must contain at least one row (n = 0)");
    if (d < 1) throw std::invalid_argument("dataset must have at least one feature column");
    if (num_classes < 2)
        throw std::invalid_argument(msg("num_classes must be >= 2, got ", num_classes));
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw std::invalid_argument(
            msg("label count ", labels.size(), " does not match row count ", n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            if (!std::isfinite(features(i, j)))
                throw std::invalid_argument(msg("non-finite value at row ", i, ", col ", j));
        }
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw std::invalid_argument(
                msg("label out of range at row ", i, ": ", labels[i], " not in [0, ",
                    num_classes, ")"));
    }
}

}  // namespace

Dataset::Dataset(Matrix features, Labels labels, int num_classes, bool labels_usable)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      labels_usable_(labels_usable) {
    check_invariants(features_, labels_, num_classes_);
}

Dataset Dataset::without_labels() const {
    return Dataset(features_, labels_, num_classes_, false);
}

bool Dataset::operator==(const Dataset& other) const {
    return num_classes_ == other.num_classes_ && labels_ == other.labels_ &&
           features_.rows() == other.features_.rows() &&
           features_.cols() == other.features_.cols() && features_ == other.features_;
}

SourceCollection::SourceCollection(std::vector<std::pair<std::string, Dataset>> sources)
    : sources_(std::move(sources)) {
    if (sources_.empty()) throw std::invalid_argument("source collection must not be empty");
    std::set<std::string> seen;
    const int d = sources_.front().second.dim();
    const int c = sources_.front().second.num_classes();
    for (const auto& [id, ds] : sources_) {
        if (!seen.insert(id).second)
            throw std::invalid_argument(msg("duplicate source id '", id, "'"));
        if (ds.dim() != d)
            throw std::invalid_argument(msg("source '", id, "' has feature dim ", ds.dim(),
                                            ", expected ", d));
        if (ds.num_classes() != c)
            throw std::invalid_argument(msg("source '", id, "' has ", ds.num_classes(),
                                            " classes, expected ", c));
    }
}

std::vector<std::string> SourceCollection::ids() const {
    std::vector<std::string> out;
    out.reserve(sources_.size());
    for (const auto& [id, ds] : sources_) out.push_back(id);
    return out;
}

int SourceCollection::dim() const { return sources_.front().second.dim(); }
int SourceCollection::num_classes() const { return sources_.front().second.num_classes(); }

FileFormat parse_format(const std::string& name) {
    if (name == "csv") return FileFormat::csv;
    if (name == "ddvm") return FileFormat::ddvm;
    throw std::invalid_argument(msg("unknown format '", name, "' (expected csv or ddvm)"));
}

FileFormat detect_format(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return FileFormat::csv;
    if (ext == ".ddvm") return FileFormat::ddvm;
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    if (in.read(magic, 4) && std::memcmp(magic, "DDVM", 4) == 0) return FileFormat::ddvm;
    return FileFormat::csv;
}

// ---------------------------------------------------------------------------
// ddvm binary format: "DDVM", u32 version=1, u32 n, u32 d, u32 C, then
// n*d little-endian f64 features row-major, then n little-endian u32 labels.
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

double get_f64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return std::bit_cast<double>(v);
}

Dataset load_ddvm(const std::filesystem::path& path, int num_classes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(msg("cannot open '", path.string(), "' for reading"));
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    if (buf.size() < 20 || std::memcmp(buf.data(), "DDVM", 4) != 0)
        throw std::runtime_error(msg("'", path.string(), "' is not a ddvm file (bad magic)"));
    const std::uint32_t version = get_u32(p + 4);
    if (version != 1)
        throw std::runtime_error(msg("unsupported ddvm version ", version, " in '",
                                     path.string(), "'"));
    const std::uint32_t n = get_u32(p + 8);
    const std::uint32_t d = get_u32(p + 12);
    const std::uint32_t c = get_u32(p + 16);
    const std::size_t expected = 20 + std::size_t(n) * d * 8 + std::size_t(n) * 4;
    if (buf.size() != expected)
        throw std::runtime_error(msg("truncated ddvm file '", path.string(), "': got ",
                                     buf.size(), " bytes, expected ", expected));
    if (num_classes > 0 && num_classes != static_cast<int>(c))
        throw std::runtime_error(msg("ddvm file stores C=", c, " but C=", num_classes,
                                     " was requested"));
    Matrix features(n, d);
    const unsigned char* q = p + 20;
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < d; ++j, q += 8) features(i, j) = get_f64(q);
    Labels labels(n);
    for (std::uint32_t i = 0; i < n; ++i, q += 4)
        labels[i] = static_cast<std::int32_t>(get_u32(q));
    return Dataset(std::move(features), std::move(labels), static_cast<int>(c));
}

void save_ddvm(const Dataset& ds, const std::filesystem::path& path) {
    std::string out;
    out.reserve(20 + std::size_t(ds.size()) * (ds.dim() * 8 + 4));
    out.append("DDVM");
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(ds.size()));
    put_u32(out, static_cast<std::uint32_t>(ds.dim()));
    put_u32(out, static_cast<std::uint32_t>(ds.num_classes()));
    for (Eigen::Index i = 0; i < ds.size(); ++i)
        for (int j = 0; j < ds.dim(); ++j) put_f64(out, ds.features()(i, j));
    for (Eigen::Index i = 0; i < ds.size(); ++i)
        put_u32(out, static_cast<std::uint32_t>(ds.labels()[i]));
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error(msg("cannot open '", path.string(), "' for writing"));
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw std::runtime_error(msg("write failed for '", path.string(), "'"));
}

// ---------------------------------------------------------------------------
// csv format: header "f0,...,f{d-1},label", features with 17 significant
// digits, labels base-10.
// ---------------------------------------------------------------------------

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

double parse_double(const std::string& cell, Eigen::Index row, std::size_t col) {
    double value = 0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && *first == ' ') ++first;
    auto [end, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || end != last)
        throw std::runtime_error(
            msg("malformed feature value '", cell, "' at row ", row, ", col ", col));
    if (!std::isfinite(value))
        throw std::runtime_error(msg("non-finite value at row ", row, ", col ", col));
    return value;
}

Dataset load_csv(const std::filesystem::path& path, int num_classes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(msg("cannot open '", path.string(), "' for reading"));
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(msg("'", path.string(), "' is empty (missing header)"));
    const auto header = split_line(line);
    if (header.size() < 2 || header.back() != "label")
        throw std::runtime_error(msg("malformed header in '", path.string(),
                                     "': expected f0,...,f{d-1},label"));
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j) {
        if (header[j] != "f" + std::to_string(j))
            throw std::runtime_error(msg("malformed header in '", path.string(),
                                         "': column ", j, " is '", header[j], "', expected 'f",
                                         j, "'"));
    }
    std::vector<std::vector<double>> rows;
    Labels labels;
    Eigen::Index row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_line(line);
        if (cells.size() != d + 1)
            throw std::runtime_error(msg("row ", row, " has ", cells.size(),
                                         " cells, expected ", d + 1));
        std::vector<double> values(d);
        for (std::size_t j = 0; j < d; ++j) values[j] = parse_double(cells[j], row, j);
        const auto& cell = cells[d];
        std::int32_t label = 0;
        auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), label);
        if (ec != std::errc() || end != cell.data() + cell.size())
            throw std::runtime_error(msg("malformed label '", cell, "' at row ", row));
        rows.push_back(std::move(values));
        labels.push_back(label);
        ++row;
    }
    if (rows.empty()) throw std::runtime_error(msg("'", path.string(), "' contains no data rows"));
    int c = num_classes;
    if (c <= 0) {
        const auto max_label = *std::max_element(labels.begin(), labels.end());
        c = std::max(max_label + 1, 2);
    }
    Matrix features(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j)
            features(i, static_cast<Eigen::Index>(j)) = rows[static_cast<std::size_t>(i)][j];
    return Dataset(std::move(features), std::move(labels), c);
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error(msg("cannot open '", path.string(), "' for writing"));
    for (int j = 0; j < ds.dim(); ++j) out << 'f' << j << ',';
    out << "label\n";
    char buf[64];
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        for (int j = 0; j < ds.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.features()(i, j));
            out << buf << ',';
        }
        out << ds.labels()[i] << '\n';
    }
    if (!out) throw std::runtime_error(msg("write failed for '", path.string(), "'"));
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, FileFormat format, int num_classes) {
    return format == FileFormat::ddvm ? load_ddvm(path, num_classes)
                                      : load_csv(path, num_classes);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, FileFormat format) {
    if (format == FileFormat::ddvm)
        save_ddvm(dataset, path);
    else
        save_csv(dataset, path);
}

SourceCollection load_source_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".ddvm" || ext == ".csv") files.push_back(entry.path());
    }
    if (files.empty())
        throw std::runtime_error(msg("no .ddvm or .csv files found in '", dir.string(), "'"));
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, Dataset>> sources;
    sources.reserve(files.size());
    for (const auto& file : files)
        sources.emplace_back(file.stem().string(), load_dataset(file, detect_format(file)));
    return SourceCollection(std::move(sources));
}

}  // namespace distval
