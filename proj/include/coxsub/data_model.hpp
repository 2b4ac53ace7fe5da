#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "coxsub/errors.hpp"

namespace coxsub {

using Index = std::int64_t;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Covariates are stored row-major so per-record rows are contiguous.
using CovMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One right-censored, possibly left-truncated observation (or pseudo-record
/// after splitting).  The record is at risk at time t iff entry < t <= exit.
struct SurvivalRecord {
    Index source_id = 0;           ///< subject id; shared by split pieces
    double entry = 0.0;            ///< left-truncation / interval start
    double exit = 0.0;             ///< observed exit time
    bool event = false;            ///< true if exit is a failure time
    std::vector<double> covariates;
    Index stratum = 0;             ///< integer stratum code (label mapped at ingestion)
};

/// Immutable survival dataset with the per-stratum index structures the
/// risk-set sweeps need: distinct event times, records ordered by exit and by
/// entry, and each record's window of event-time indices.
class Dataset {
  public:
    Dataset(std::vector<SurvivalRecord> records,
            std::vector<std::string> covariate_names = {},
            std::vector<std::string> stratum_labels = {});

    Index n() const { return n_; }
    Index n_events() const { return static_cast<Index>(event_ids_.size()); }
    Index n_censored() const { return static_cast<Index>(censored_ids_.size()); }
    int r() const { return static_cast<int>(x_.cols()); }
    int n_strata() const { return n_strata_; }

    double entry(Index i) const { return entry_[i]; }
    double exit(Index i) const { return exit_[i]; }
    bool event(Index i) const { return event_[i] != 0; }
    Index stratum(Index i) const { return stratum_[i]; }
    Index source_id(Index i) const { return source_id_[i]; }

    const CovMatrix& covariates() const { return x_; }
    const std::vector<std::string>& covariate_names() const { return covariate_names_; }
    /// Original stratum labels indexed by internal stratum code.
    const std::vector<std::string>& stratum_labels() const { return stratum_labels_; }

    /// Record indices of events / censored records, in dataset order.  The
    /// censored list is the canonical indexing for sampling plans and draws.
    const std::vector<Index>& event_ids() const { return event_ids_; }
    const std::vector<Index>& censored_ids() const { return censored_ids_; }

    /// Sorted distinct failure times within a stratum.
    const std::vector<double>& event_times(Index stratum) const { return event_times_[stratum]; }
    /// Number of events at event_times(s)[k].
    const std::vector<int>& event_counts(Index stratum) const { return event_counts_[stratum]; }
    /// Event record ids of a stratum, ascending by time; offsets[k]..offsets[k+1]
    /// delimit the events tied at event_times(s)[k].
    const std::vector<Index>& events_by_time(Index stratum) const { return events_by_time_[stratum]; }
    const std::vector<Index>& event_time_offsets(Index stratum) const { return event_offsets_[stratum]; }

    /// Record ids of a stratum sorted by exit descending / by entry descending
    /// (entry list only holds records with entry > 0).
    const std::vector<Index>& by_exit_desc(Index stratum) const { return by_exit_desc_[stratum]; }
    const std::vector<Index>& by_entry_desc(Index stratum) const { return by_entry_desc_[stratum]; }

    /// Indices into event_times(stratum(i)) of the first/last event time inside
    /// (entry_i, exit_i].  first > last means the record spans no event time and
    /// contributes nothing to the partial likelihood.
    int first_event_index(Index i) const { return first_event_idx_[i]; }
    int last_event_index(Index i) const { return last_event_idx_[i]; }

    /// New dataset holding the given records (covariate data copied).
    Dataset subset(const std::vector<Index>& rows) const;

    /// Re-checks every construction invariant; throws on violation.  Safe to
    /// call repeatedly (the dataset is immutable).
    void validate() const;

  private:
    Dataset() = default;  ///< used by subset(), which fills the arrays directly

    void build_index();

    Index n_ = 0;
    int n_strata_ = 0;
    std::vector<double> entry_, exit_;
    std::vector<std::uint8_t> event_;
    std::vector<Index> stratum_, source_id_;
    CovMatrix x_;
    std::vector<std::string> covariate_names_;
    std::vector<std::string> stratum_labels_;

    std::vector<Index> event_ids_, censored_ids_;
    std::vector<std::vector<double>> event_times_;
    std::vector<std::vector<int>> event_counts_;
    std::vector<std::vector<Index>> events_by_time_, event_offsets_;
    std::vector<std::vector<Index>> by_exit_desc_, by_entry_desc_;
    std::vector<int> first_event_idx_, last_event_idx_;
};

/// CSV column names; any column not listed here is read as a numeric
/// covariate, in file order.
struct CsvSchema {
    std::string id = "id";
    std::string start = "start";    ///< optional in the file; missing -> 0
    std::string stop = "stop";
    std::string event = "event";
    std::string stratum = "stratum";  ///< optional; string labels are mapped
};

Dataset load_csv(const std::string& path, const CsvSchema& schema = {});

/// Write a dataset back out with full round-trip precision.  Columns:
/// id,start,stop,event[,stratum],<covariate names>.
void write_csv(const Dataset& d, const std::string& path);
void write_csv(const Dataset& d, std::ostream& out);

/// Mapping between pseudo-records and the source rows they were cut from.
struct SplitMap {
    std::vector<Index> pseudo_to_source;                       ///< source row, by pseudo-record
    std::unordered_map<Index, std::vector<Index>> source_to_pseudo;
};

struct SplitResult {
    Dataset data;
    SplitMap map;
};

/// Partition every record's (entry, exit] at the interior cutpoints; the
/// event flag moves to the final piece.  Interval content and the partial
/// likelihood are unchanged.
SplitResult split_at_times(const Dataset& d, const std::vector<double>& cutpoints);

/// Cutpoints = union of all strata's event times (the split needed before
/// apply_time_transform).
SplitResult split_at_event_times(const Dataset& d);

/// Append the covariate column x_k * g(t*), where t* is the single event time
/// of the record's stratum inside its interval (records split at event times
/// carry at most one; otherwise NotSplit is thrown).  Records spanning no
/// event time get 0, which never enters a risk-set sum.
Dataset apply_time_transform(const Dataset& d, int covariate, const std::function<double(double)>& g,
                             const std::string& new_name = "");

}  // namespace coxsub
