#ifndef UACTN_UACTN_HPP
#define UACTN_UACTN_HPP

#include "uactn/checkpoint.hpp"
#include "uactn/config.hpp"
#include "uactn/data.hpp"
#include "uactn/experiment.hpp"
#include "uactn/gradcheck.hpp"
#include "uactn/losses.hpp"
#include "uactn/metrics.hpp"
#include "uactn/model.hpp"
#include "uactn/numeric.hpp"
#include "uactn/rng.hpp"
#include "uactn/trainer.hpp"
#include "uactn/uncertainty.hpp"

#endif  // UACTN_UACTN_HPP
