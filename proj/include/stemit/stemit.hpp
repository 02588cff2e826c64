// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stemit/annual.hpp"
#include "stemit/autograd.hpp"
#include "stemit/checkpoint.hpp"
#include "stemit/climate.hpp"
#include "stemit/commands.hpp"
#include "stemit/config.hpp"
#include "stemit/delaunay.hpp"
#include "stemit/error.hpp"
#include "stemit/geo.hpp"
#include "stemit/gradcheck.hpp"
#include "stemit/gradsuite.hpp"
#include "stemit/jsonl.hpp"
#include "stemit/log.hpp"
#include "stemit/metrics.hpp"
#include "stemit/model.hpp"
#include "stemit/record.hpp"
#include "stemit/rng.hpp"
#include "stemit/sample.hpp"
#include "stemit/splits.hpp"
#include "stemit/synth.hpp"
#include "stemit/tensor.hpp"
#include "stemit/trainer.hpp"
