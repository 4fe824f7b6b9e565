#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "scs/data.hpp"

namespace scs {

/**
 * Loads a dataset from CSV. The header must name the columns
 *   y,t,x1..xp,z1..zq[,m]
 * in that order (q may be zero; m — binomial trial counts — is optional).
 * Parsing is strict: every cell must parse completely as a number, every row
 * must match the header width, and t must hold integers in 1..H.
 */
Dataset load_dataset_csv(const std::string& path);

/**
 * Loads known group-assignment probabilities from CSV with header e1..eH.
 * Each row must sum to one within 1e-6 with entries in (0, 1].
 */
Eigen::MatrixXd load_propensity_csv(const std::string& path);

/** One CSV output: optional '#' comment lines, a header, then rows. */
struct CsvTable {
  std::vector<std::string> comments;  // written as "# <line>"
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);

/** Shortest round-trip decimal form; locale-independent and deterministic. */
std::string format_double(double v);

/** Writes a dataset back out in the schema load_dataset_csv reads. */
void write_dataset_csv(const std::string& path, const Dataset& data,
                       const std::vector<std::string>& comments = {});

/** Writes probabilities with header e1..eH. */
void write_propensity_csv(const std::string& path, const Eigen::MatrixXd& e,
                          const std::vector<std::string>& comments = {});

}  // namespace scs
