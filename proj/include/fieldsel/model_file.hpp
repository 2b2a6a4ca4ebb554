// Model description files.
//
// Line-oriented `key = value` text; `#` starts a comment. Keys:
//
//   sites    = grid <rows> <cols> [centered]   sites named "r,c"
//   sites    = <name> <name> ...               explicit site list
//   alphabet = <int> <int> ...                 symbol values (default: -1 1)
//   coupling = <real>                          default J for edges without one
//   edges    = nearest | none                  nearest-neighbour edges (grid only)
//   edge     = <site> <site> [<real>]          repeatable
//   field    = <site> <real>                   repeatable
//   clique   = <site> ... : <energy> ...       repeatable; energies over the
//                                              clique's local codes
//
// `sites` must come first. A file may use pairwise terms (edge/edges/field) or
// clique potentials, not both. Every parse error names the offending line.
#pragma once

#include <istream>
#include <string>

#include "fieldsel/field.hpp"

namespace fieldsel {

GibbsModel parse_model(std::istream& in, const std::string& source = "<model>");
GibbsModel load_model(const std::string& path);

// Text of the built-in 3x3 nearest-neighbour model with J = 0.2.
std::string default_ising_3x3_text();

} // namespace fieldsel
