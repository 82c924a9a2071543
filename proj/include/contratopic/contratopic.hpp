#pragma once

#include "contratopic/error.hpp"
#include "contratopic/hash.hpp"
#include "contratopic/rng.hpp"
#include "contratopic/archive.hpp"
#include "contratopic/corpus.hpp"
#include "contratopic/cooc.hpp"
#include "contratopic/diffcore.hpp"
#include "contratopic/adam.hpp"
#include "contratopic/ntm.hpp"
#include "contratopic/contrareg.hpp"
#include "contratopic/trainer.hpp"
#include "contratopic/evalsuite.hpp"
#include "contratopic/synthetic.hpp"
#include "contratopic/manifest.hpp"
