#include "coxsub/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "coxsub/format.hpp"

namespace coxsub {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto res = std::from_chars(b, e, out);
    return res.ec == std::errc{} && res.ptr == e && !s.empty();
}

bool parse_int(const std::string& s, std::int64_t& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto res = std::from_chars(b, e, out);
    return res.ec == std::errc{} && res.ptr == e && !s.empty();
}

}  // namespace

Dataset::Dataset(std::vector<SurvivalRecord> records,
                 std::vector<std::string> covariate_names,
                 std::vector<std::string> stratum_labels) {
    n_ = static_cast<Index>(records.size());
    if (n_ == 0) throw DataError("dataset is empty");

    const auto r = records.front().covariates.size();
    entry_.resize(n_);
    exit_.resize(n_);
    event_.resize(n_);
    stratum_.resize(n_);
    source_id_.resize(n_);
    x_.resize(n_, static_cast<Eigen::Index>(r));

    // dense-code strata in order of first appearance
    std::unordered_map<Index, Index> code_of;
    for (Index i = 0; i < n_; ++i) {
        const auto& rec = records[i];
        if (rec.covariates.size() != r)
            throw DataError("row " + std::to_string(i) + ": inconsistent covariate count");
        if (!(rec.entry >= 0.0) || !(rec.entry < rec.exit) || !std::isfinite(rec.exit))
            throw InvalidInterval(i);
        entry_[i] = rec.entry;
        exit_[i] = rec.exit;
        event_[i] = rec.event ? 1 : 0;
        source_id_[i] = rec.source_id;
        auto it = code_of.find(rec.stratum);
        if (it == code_of.end()) {
            Index code = static_cast<Index>(code_of.size());
            code_of.emplace(rec.stratum, code);
            std::string label;
            if (rec.stratum >= 0 &&
                static_cast<std::size_t>(rec.stratum) < stratum_labels.size())
                label = stratum_labels[rec.stratum];
            else
                label = std::to_string(rec.stratum);
            stratum_labels_.push_back(std::move(label));
            stratum_[i] = code;
        } else {
            stratum_[i] = it->second;
        }
        for (std::size_t j = 0; j < r; ++j) {
            double v = rec.covariates[j];
            if (!std::isfinite(v))
                throw DataError("row " + std::to_string(i) + ": non-finite covariate");
            x_(i, static_cast<Eigen::Index>(j)) = v;
        }
    }
    n_strata_ = static_cast<int>(code_of.size());

    if (covariate_names.size() == r) {
        covariate_names_ = std::move(covariate_names);
    } else {
        covariate_names_.resize(r);
        for (std::size_t j = 0; j < r; ++j) covariate_names_[j] = "x" + std::to_string(j + 1);
    }

    build_index();
    validate();
}

void Dataset::build_index() {
    event_times_.assign(n_strata_, {});
    event_counts_.assign(n_strata_, {});
    events_by_time_.assign(n_strata_, {});
    event_offsets_.assign(n_strata_, {});
    by_exit_desc_.assign(n_strata_, {});
    by_entry_desc_.assign(n_strata_, {});
    first_event_idx_.assign(n_, 0);
    last_event_idx_.assign(n_, -1);
    event_ids_.clear();
    censored_ids_.clear();

    for (Index i = 0; i < n_; ++i) {
        (event_[i] ? event_ids_ : censored_ids_).push_back(i);
        by_exit_desc_[stratum_[i]].push_back(i);
        if (entry_[i] > 0.0) by_entry_desc_[stratum_[i]].push_back(i);
        if (event_[i]) events_by_time_[stratum_[i]].push_back(i);
    }

    for (int s = 0; s < n_strata_; ++s) {
        auto& ex = by_exit_desc_[s];
        std::stable_sort(ex.begin(), ex.end(),
                         [&](Index a, Index b) { return exit_[a] > exit_[b]; });
        auto& en = by_entry_desc_[s];
        std::stable_sort(en.begin(), en.end(),
                         [&](Index a, Index b) { return entry_[a] > entry_[b]; });
        auto& ev = events_by_time_[s];
        std::stable_sort(ev.begin(), ev.end(),
                         [&](Index a, Index b) { return exit_[a] < exit_[b]; });

        auto& times = event_times_[s];
        auto& counts = event_counts_[s];
        auto& offsets = event_offsets_[s];
        offsets.push_back(0);
        for (std::size_t j = 0; j < ev.size(); ++j) {
            double t = exit_[ev[j]];
            if (times.empty() || t != times.back()) {
                if (!times.empty()) offsets.push_back(static_cast<Index>(j));
                times.push_back(t);
                counts.push_back(1);
            } else {
                ++counts.back();
            }
        }
        offsets.push_back(static_cast<Index>(ev.size()));
    }

    for (Index i = 0; i < n_; ++i) {
        const auto& times = event_times_[stratum_[i]];
        auto first = std::upper_bound(times.begin(), times.end(), entry_[i]);
        auto last = std::upper_bound(times.begin(), times.end(), exit_[i]);
        first_event_idx_[i] = static_cast<int>(first - times.begin());
        last_event_idx_[i] = static_cast<int>(last - times.begin()) - 1;
    }
}

void Dataset::validate() const {
    if (n_ == 0) throw DataError("dataset is empty");
    for (Index i = 0; i < n_; ++i) {
        if (!(entry_[i] >= 0.0) || !(entry_[i] < exit_[i])) throw InvalidInterval(i);
    }
    // within each subject, at most one event record and it must carry the
    // latest exit time of that subject
    std::unordered_map<Index, std::pair<double, int>> per_source;  // max exit, #events
    std::unordered_map<Index, double> event_exit;
    for (Index i = 0; i < n_; ++i) {
        auto& agg = per_source[source_id_[i]];
        agg.first = std::max(agg.first, exit_[i]);
        if (event_[i]) {
            if (++agg.second > 1)
                throw DataError("subject " + std::to_string(source_id_[i]) +
                                " has more than one event record");
            event_exit[source_id_[i]] = exit_[i];
        }
    }
    for (const auto& [sid, ex] : event_exit) {
        if (ex < per_source[sid].first)
            throw DataError("subject " + std::to_string(sid) +
                            " has records after its event record");
    }
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
    // Copies the selected rows directly into a new dataset, re-densifying
    // stratum codes in order of first appearance.  The parent's invariants
    // imply the subset's, so construction validation is not repeated; this
    // keeps subsample materialization cheap on the two-step hot path.
    if (rows.empty()) throw DataError("dataset is empty");
    const Index k = static_cast<Index>(rows.size());

    Dataset out;
    out.n_ = k;
    out.entry_.resize(k);
    out.exit_.resize(k);
    out.event_.resize(k);
    out.stratum_.resize(k);
    out.source_id_.resize(k);
    out.x_.resize(k, x_.cols());
    out.covariate_names_ = covariate_names_;

    std::vector<Index> code_of(n_strata_, -1);
    for (Index j = 0; j < k; ++j) {
        const Index i = rows[j];
        if (i < 0 || i >= n_) throw DataError("subset row out of range");
        out.entry_[j] = entry_[i];
        out.exit_[j] = exit_[i];
        out.event_[j] = event_[i];
        out.source_id_[j] = source_id_[i];
        Index& code = code_of[stratum_[i]];
        if (code < 0) {
            code = static_cast<Index>(out.stratum_labels_.size());
            out.stratum_labels_.push_back(stratum_labels_[stratum_[i]]);
        }
        out.stratum_[j] = code;
        out.x_.row(j) = x_.row(i);
    }
    out.n_strata_ = static_cast<int>(out.stratum_labels_.size());

    // For strictly ascending row selections (the subsampling hot path) the
    // parent's sorted orders restrict to the subset's, so the sort work in
    // build_index can be replaced by filtered scans of the parent indexes.
    bool ascending = true;
    for (Index j = 1; j < k && ascending; ++j) ascending = rows[j - 1] < rows[j];
    if (!ascending) {
        out.build_index();
        return out;
    }

    out.event_times_.assign(out.n_strata_, {});
    out.event_counts_.assign(out.n_strata_, {});
    out.events_by_time_.assign(out.n_strata_, {});
    out.event_offsets_.assign(out.n_strata_, {});
    out.by_exit_desc_.assign(out.n_strata_, {});
    out.by_entry_desc_.assign(out.n_strata_, {});
    out.first_event_idx_.assign(k, 0);
    out.last_event_idx_.assign(k, -1);
    for (Index j = 0; j < k; ++j) {
        (out.event_[j] ? out.event_ids_ : out.censored_ids_).push_back(j);
        out.by_exit_desc_[out.stratum_[j]].push_back(j);
        if (out.entry_[j] > 0.0) out.by_entry_desc_[out.stratum_[j]].push_back(j);
    }
    // sorting the k selected rows is cheaper than scanning the parent's
    // length-n orders; ties keep row order, exactly as build_index produces
    for (int s = 0; s < out.n_strata_; ++s) {
        auto& ex = out.by_exit_desc_[s];
        std::stable_sort(ex.begin(), ex.end(),
                         [&](Index a, Index b) { return out.exit_[a] > out.exit_[b]; });
        auto& en = out.by_entry_desc_[s];
        std::stable_sort(en.begin(), en.end(),
                         [&](Index a, Index b) { return out.entry_[a] > out.entry_[b]; });
    }

    std::vector<Index> to_sub(n_, -1);
    for (Index j = 0; j < k; ++j) to_sub[rows[j]] = j;

    if (out.event_ids_.size() == event_ids_.size()) {
        // Every parent event row was selected (the subsampling hot path, which
        // keeps all events): the event-time grid carries over per stratum and
        // so does each record's [first, last] event-window.
        for (int s = 0; s < n_strata_; ++s) {
            const Index code = code_of[s];
            if (code < 0) continue;
            out.event_times_[code] = event_times_[s];
            out.event_counts_[code] = event_counts_[s];
            out.event_offsets_[code] = event_offsets_[s];
            auto& ev = out.events_by_time_[code];
            ev.reserve(events_by_time_[s].size());
            for (Index i : events_by_time_[s]) ev.push_back(to_sub[i]);
        }
        for (Index j = 0; j < k; ++j) {
            out.first_event_idx_[j] = first_event_idx_[rows[j]];
            out.last_event_idx_[j] = last_event_idx_[rows[j]];
        }
        return out;
    }

    for (int s = 0; s < n_strata_; ++s) {
        const Index code = code_of[s];
        if (code < 0) continue;
        auto& ev = out.events_by_time_[code];
        for (Index i : events_by_time_[s])
            if (to_sub[i] >= 0) ev.push_back(to_sub[i]);

        auto& times = out.event_times_[code];
        auto& counts = out.event_counts_[code];
        auto& offsets = out.event_offsets_[code];
        offsets.push_back(0);
        for (std::size_t j = 0; j < ev.size(); ++j) {
            const double t = out.exit_[ev[j]];
            if (times.empty() || t != times.back()) {
                if (!times.empty()) offsets.push_back(static_cast<Index>(j));
                times.push_back(t);
                counts.push_back(1);
            } else {
                ++counts.back();
            }
        }
        offsets.push_back(static_cast<Index>(ev.size()));
    }

    for (Index j = 0; j < k; ++j) {
        const auto& times = out.event_times_[out.stratum_[j]];
        auto first = std::upper_bound(times.begin(), times.end(), out.entry_[j]);
        auto last = std::upper_bound(times.begin(), times.end(), out.exit_[j]);
        out.first_event_idx_[j] = static_cast<int>(first - times.begin());
        out.last_event_idx_[j] = static_cast<int>(last - times.begin()) - 1;
    }
    return out;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
    auto header = split_line(line);

    int col_id = -1, col_start = -1, col_stop = -1, col_event = -1, col_stratum = -1;
    std::vector<int> cov_cols;
    std::vector<std::string> cov_names;
    for (std::size_t j = 0; j < header.size(); ++j) {
        const auto& h = header[j];
        if (h == schema.id) col_id = static_cast<int>(j);
        else if (h == schema.start) col_start = static_cast<int>(j);
        else if (h == schema.stop) col_stop = static_cast<int>(j);
        else if (h == schema.event) col_event = static_cast<int>(j);
        else if (h == schema.stratum) col_stratum = static_cast<int>(j);
        else {
            cov_cols.push_back(static_cast<int>(j));
            cov_names.push_back(h);
        }
    }
    if (col_id < 0) throw MissingColumn(schema.id);
    if (col_stop < 0) throw MissingColumn(schema.stop);
    if (col_event < 0) throw MissingColumn(schema.event);

    std::vector<SurvivalRecord> recs;
    std::unordered_map<std::string, Index> stratum_code;
    std::vector<std::string> stratum_labels;
    Index row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        auto fields = split_line(line);
        if (fields.size() != header.size())
            throw DataError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        SurvivalRecord rec;
        if (!parse_int(fields[col_id], rec.source_id))
            throw NonNumericValue(row, schema.id, fields[col_id]);
        if (col_start >= 0) {
            if (!parse_double(fields[col_start], rec.entry))
                throw NonNumericValue(row, schema.start, fields[col_start]);
        }
        if (!parse_double(fields[col_stop], rec.exit))
            throw NonNumericValue(row, schema.stop, fields[col_stop]);
        double ev;
        if (!parse_double(fields[col_event], ev) || (ev != 0.0 && ev != 1.0))
            throw NonNumericValue(row, schema.event, fields[col_event]);
        rec.event = ev == 1.0;
        if (!(rec.entry >= 0.0) || !(rec.entry < rec.exit)) throw InvalidInterval(row);
        if (col_stratum >= 0) {
            const auto& label = fields[col_stratum];
            auto it = stratum_code.find(label);
            if (it == stratum_code.end()) {
                Index code = static_cast<Index>(stratum_code.size());
                stratum_code.emplace(label, code);
                stratum_labels.push_back(label);
                rec.stratum = code;
            } else {
                rec.stratum = it->second;
            }
        }
        rec.covariates.resize(cov_cols.size());
        for (std::size_t j = 0; j < cov_cols.size(); ++j) {
            double v;
            if (!parse_double(fields[cov_cols[j]], v) || !std::isfinite(v))
                throw NonNumericValue(row, cov_names[j], fields[cov_cols[j]]);
            rec.covariates[j] = v;
        }
        recs.push_back(std::move(rec));
    }
    return Dataset(std::move(recs), cov_names, stratum_labels);
}

void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_csv(d, out);
}

void write_csv(const Dataset& d, std::ostream& out) {
    const bool strat = d.n_strata() > 1;
    out << "id,start,stop,event";
    if (strat) out << ",stratum";
    for (const auto& name : d.covariate_names()) out << ',' << name;
    out << '\n';
    for (Index i = 0; i < d.n(); ++i) {
        out << d.source_id(i) << ',' << format_double(d.entry(i)) << ','
            << format_double(d.exit(i)) << ',' << (d.event(i) ? 1 : 0);
        if (strat) out << ',' << d.stratum_labels()[d.stratum(i)];
        for (int j = 0; j < d.r(); ++j) out << ',' << format_double(d.covariates()(i, j));
        out << '\n';
    }
}

SplitResult split_at_times(const Dataset& d, const std::vector<double>& cutpoints) {
    std::vector<double> cuts(cutpoints);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::vector<SurvivalRecord> recs;
    SplitMap map;
    for (Index i = 0; i < d.n(); ++i) {
        double lo = d.entry(i), hi = d.exit(i);
        auto b = std::upper_bound(cuts.begin(), cuts.end(), lo);
        std::vector<double> bounds{lo};
        for (auto it = b; it != cuts.end() && *it < hi; ++it) bounds.push_back(*it);
        bounds.push_back(hi);
        for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
            SurvivalRecord rec;
            rec.source_id = d.source_id(i);
            rec.entry = bounds[k];
            rec.exit = bounds[k + 1];
            rec.event = d.event(i) && k + 2 == bounds.size();
            rec.stratum = d.stratum(i);
            rec.covariates.assign(d.covariates().row(i).begin(), d.covariates().row(i).end());
            map.pseudo_to_source.push_back(i);
            map.source_to_pseudo[i].push_back(static_cast<Index>(recs.size()));
            recs.push_back(std::move(rec));
        }
    }
    return {Dataset(std::move(recs), d.covariate_names(), d.stratum_labels()), std::move(map)};
}

SplitResult split_at_event_times(const Dataset& d) {
    std::vector<double> cuts;
    for (int s = 0; s < d.n_strata(); ++s) {
        const auto& t = d.event_times(s);
        cuts.insert(cuts.end(), t.begin(), t.end());
    }
    return split_at_times(d, cuts);
}

Dataset apply_time_transform(const Dataset& d, int covariate, const std::function<double(double)>& g,
                             const std::string& new_name) {
    if (covariate < 0 || covariate >= d.r())
        throw DataError("time transform: covariate index out of range");
    std::vector<SurvivalRecord> recs;
    recs.reserve(d.n());
    for (Index i = 0; i < d.n(); ++i) {
        int lo = d.first_event_index(i), hi = d.last_event_index(i);
        if (hi - lo > 0) throw NotSplit(i);
        double value = 0.0;
        if (hi == lo) {
            double t = d.event_times(d.stratum(i))[lo];
            value = d.covariates()(i, covariate) * g(t);
        }
        SurvivalRecord rec;
        rec.source_id = d.source_id(i);
        rec.entry = d.entry(i);
        rec.exit = d.exit(i);
        rec.event = d.event(i);
        rec.stratum = d.stratum(i);
        rec.covariates.assign(d.covariates().row(i).begin(), d.covariates().row(i).end());
        rec.covariates.push_back(value);
        recs.push_back(std::move(rec));
    }
    auto names = d.covariate_names();
    names.push_back(new_name.empty() ? names[covariate] + "_t" : new_name);
    return Dataset(std::move(recs), names, d.stratum_labels());
}

}  // namespace coxsub
