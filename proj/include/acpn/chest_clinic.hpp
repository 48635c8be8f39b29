#pragma once

#include <acpn/network.hpp>

namespace acpn {

/// The classical eight-variable chest clinic network. All variables are
/// binary with states {yes, no}; "either" is the logical OR of tub and
/// lung. Used as the ground truth and learner skeleton of the simulation
/// experiments and as the standard test fixture.
inline NetworkDef chest_clinic() {
  NetworkDef net;
  int asia = net.add_variable("asia", {"yes", "no"});
  int tub = net.add_variable("tub", {"yes", "no"});
  int smoke = net.add_variable("smoke", {"yes", "no"});
  int lung = net.add_variable("lung", {"yes", "no"});
  int bronc = net.add_variable("bronc", {"yes", "no"});
  int either = net.add_variable("either", {"yes", "no"});
  int xray = net.add_variable("xray", {"yes", "no"});
  int dysp = net.add_variable("dysp", {"yes", "no"});

  net.set_parents(tub, {asia});
  net.set_parents(lung, {smoke});
  net.set_parents(bronc, {smoke});
  net.set_parents(either, {tub, lung});
  net.set_parents(xray, {either});
  net.set_parents(dysp, {either, bronc});

  net.set_cpt(asia, {0.01, 0.99});
  net.set_cpt(tub, {0.05, 0.95,    // asia = yes
                    0.01, 0.99});  // asia = no
  net.set_cpt(smoke, {0.5, 0.5});
  net.set_cpt(lung, {0.1, 0.9,      // smoke = yes
                     0.01, 0.99});  // smoke = no
  net.set_cpt(bronc, {0.6, 0.4,    // smoke = yes
                      0.3, 0.7});  // smoke = no
  net.set_cpt(either, {1.0, 0.0,    // tub = yes, lung = yes
                       1.0, 0.0,    // tub = yes, lung = no
                       1.0, 0.0,    // tub = no,  lung = yes
                       0.0, 1.0});  // tub = no,  lung = no
  net.set_cpt(xray, {0.98, 0.02,    // either = yes
                     0.05, 0.95});  // either = no
  net.set_cpt(dysp, {0.9, 0.1,    // either = yes, bronc = yes
                     0.7, 0.3,    // either = yes, bronc = no
                     0.8, 0.2,    // either = no,  bronc = yes
                     0.1, 0.9});  // either = no,  bronc = no
  return net;
}

/// Name of the logical-transition variable that stays in fixed mode.
inline constexpr const char* kLogicalVariable = "either";

}  // namespace acpn
