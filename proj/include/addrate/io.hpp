#pragma once

#include <string>
#include <utility>

#include "addrate/additive_model.hpp"
#include "addrate/complexity.hpp"
#include "addrate/estimators.hpp"
#include "addrate/lowerbound.hpp"
#include "addrate/synthgen.hpp"

namespace addrate::io {

// All floating point values written to CSV go through this (%.17g), so files
// round-trip doubles exactly and reruns are byte-identical.
std::string format_double(double v);

void save_additive(const std::string& path, const AdditiveFunction& f);
AdditiveFunction load_additive(const std::string& path);

// Dataset bundle: <stem>.csv holds "x1,..,xd,y" rows, <stem>.truth.json the
// generating function, <stem>.json the generator settings.
struct LoadedDataset {
  Dataset ds;
  GenConfig cfg;
};
void save_dataset(const std::string& stem, const Dataset& ds, const GenConfig& cfg);
LoadedDataset load_dataset(const std::string& stem);

// Sign patterns stored as strings over {+,-,0}, row-major per member.
void save_packing(const std::string& path, const PackingSet& set);
PackingSet load_packing(const std::string& path, const EigenSystem& es);

void save_curve_csv(const std::string& path, const ComplexityCurve& curve,
                    const EnvelopeReport& rep);

void save_fit(const std::string& path, const FitResult& fit, const EigenSystem& es);

}  // namespace addrate::io
