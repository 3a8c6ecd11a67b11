#ifndef SCOUTGPT_SCOUTGPT_HPP_
#define SCOUTGPT_SCOUTGPT_HPP_

#include "scoutgpt/analytics.hpp"
#include "scoutgpt/checkpoint.hpp"
#include "scoutgpt/codec.hpp"
#include "scoutgpt/corpus.hpp"
#include "scoutgpt/discretize.hpp"
#include "scoutgpt/domain.hpp"
#include "scoutgpt/error.hpp"
#include "scoutgpt/inference.hpp"
#include "scoutgpt/metrics.hpp"
#include "scoutgpt/model.hpp"
#include "scoutgpt/profile.hpp"
#include "scoutgpt/rng.hpp"
#include "scoutgpt/segment.hpp"
#include "scoutgpt/synth.hpp"
#include "scoutgpt/trainer.hpp"
#include "scoutgpt/transformer.hpp"
#include "scoutgpt/vocabulary.hpp"
#include "scoutgpt/service.hpp"  // last: its socket headers must follow Eigen

#endif  // SCOUTGPT_SCOUTGPT_HPP_
