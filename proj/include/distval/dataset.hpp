#ifndef DISTVAL_DATASET_HPP
#define DISTVAL_DATASET_HPP

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "distval/common.hpp"

namespace distval {

/// A labeled sample set: n rows of d-dimensional features plus integer
/// class labels in [0, C). The class count is stored explicitly so that
/// sources missing a class keep a consistent label space.
///
/// Instances are immutable after construction and safe to share across
/// threads.
class Dataset {
public:
    Dataset(Matrix features, Labels labels, int num_classes, bool labels_usable = true);

    const Matrix& features() const { return features_; }
    const Labels& labels() const { return labels_; }
    int num_classes() const { return num_classes_; }

    Eigen::Index size() const { return features_.rows(); }
    int dim() const { return static_cast<int>(features_.cols()); }

    /// False for reference sets whose labels were stripped; label-dependent
    /// scorers must reject such datasets.
    bool labels_usable() const { return labels_usable_; }
    Dataset without_labels() const;

    bool operator==(const Dataset& other) const;

private:
    Matrix features_;
    Labels labels_;
    int num_classes_ = 0;
    bool labels_usable_ = true;
};

/// An ordered set of named datasets sharing one feature space and label
/// space. Source ids are unique; order is significant.
class SourceCollection {
public:
    explicit SourceCollection(std::vector<std::pair<std::string, Dataset>> sources);

    std::size_t size() const { return sources_.size(); }
    const std::string& id(std::size_t i) const { return sources_.at(i).first; }
    const Dataset& dataset(std::size_t i) const { return sources_.at(i).second; }
    const std::vector<std::pair<std::string, Dataset>>& sources() const { return sources_; }

    std::vector<std::string> ids() const;
    int dim() const;
    int num_classes() const;

private:
    std::vector<std::pair<std::string, Dataset>> sources_;
};

enum class FileFormat { csv, ddvm };

FileFormat parse_format(const std::string& name);

/// Infers csv/ddvm from the file extension, falling back to sniffing the
/// ddvm magic bytes.
FileFormat detect_format(const std::filesystem::path& path);

/// Loads a dataset from disk. For csv the class count is inferred as
/// max(label)+1 unless `num_classes` > 0 overrides it; ddvm stores the
/// class count explicitly and `num_classes` must be 0 or match.
Dataset load_dataset(const std::filesystem::path& path, FileFormat format, int num_classes = 0);

/// Writes a dataset. ddvm round-trips bit-exactly; csv round-trips within
/// decimal formatting precision (17 significant digits).
void save_dataset(const Dataset& dataset, const std::filesystem::path& path, FileFormat format);

/// Loads every *.ddvm / *.csv file in a directory as one collection,
/// ordered by filename; ids are the file stems.
SourceCollection load_source_dir(const std::filesystem::path& dir);

}  // namespace distval

#endif
