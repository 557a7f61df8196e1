/*!
  \file encoding.hpp
  \brief State-encoding tree and ordered enumeration of candidate encodings

  States are assigned codes in depth-first discovery order starting from the
  initial state, which is fixed to the all-zero code. At every level the
  remaining codes are tried in ascending order of the summed Hamming distance
  over the transitions whose endpoints are both encoded, ties broken by the
  numeric code. Leaves are produced lazily, left to right.
*/

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "fsm.hpp"

namespace fluxsynth
{

/*! \brief Candidate effect kinds of an input signal (bit mask). */
enum effect_kind : uint8_t
{
  kind_set = 1,
  kind_clear = 2,
  kind_toggle = 4,
  kind_hold = 8
};

inline constexpr uint8_t kind_any = kind_set | kind_clear | kind_toggle;

inline std::string kinds_to_string( uint8_t kinds )
{
  if ( kinds == 0 )
    return "undecided";
  std::string s;
  auto add = [&]( uint8_t k, char const* name ) {
    if ( kinds & k )
      s += ( s.empty() ? "" : "|" ) + std::string( name );
  };
  add( kind_set, "set" );
  add( kind_clear, "clear" );
  add( kind_toggle, "toggle" );
  add( kind_hold, "hold" );
  return s;
}

/*! \brief Assignment of a width-bit code to every state.
 *
 * Bit b of a code is the value of state variable Qb.
 */
struct state_encoding
{
  uint32_t width{ 0 };
  std::vector<uint64_t> codes; /* indexed by state */
  uint64_t ordinal{ 0 };       /* position in the enumeration order */

  bool bit( uint32_t state, uint32_t b ) const { return ( codes[state] >> b ) & 1u; }

  /*! \brief Code as a bit string, most significant bit first. */
  std::string code_string( uint32_t state ) const
  {
    std::string s;
    for ( uint32_t b = width; b-- > 0; )
      s += bit( state, b ) ? '1' : '0';
    return s;
  }

  std::optional<uint32_t> state_of( uint64_t code ) const
  {
    for ( uint32_t s = 0; s < codes.size(); ++s )
      if ( codes[s] == code )
        return s;
    return std::nullopt;
  }
};

/*! \brief Smallest width that can hold n distinct codes. */
inline uint32_t minimal_width( std::size_t n )
{
  return n <= 1 ? 0u : static_cast<uint32_t>( std::bit_width( n - 1 ) );
}

/*! \brief Sum over all transitions (both endpoints encoded) of the Hamming distance. */
inline uint32_t transition_distance( finite_state_machine const& fsm, std::vector<uint64_t> const& codes,
                                     std::vector<bool> const& assigned )
{
  uint32_t sum = 0;
  for ( auto const& [key, next] : fsm.transitions )
    if ( assigned[key.first] && assigned[next] )
      sum += static_cast<uint32_t>( std::popcount( codes[key.first] ^ codes[next] ) );
  return sum;
}

/*! \brief Classification of a transition by the depth-first traversal. */
enum class edge_class : uint8_t
{
  tree,  /* discovers its target */
  back,  /* returns to a state on the current traversal path */
  cross, /* reaches an already finished state */
  self   /* self-loop, including implicit holds */
};

/*! \brief Depth-first traversal of the state graph from the initial state.
 *
 * Successors are visited in input declaration order. Unreachable states are
 * appended in declaration order; their transitions, self-loops included, are
 * classified as cross since they never occur.
 */
struct state_traversal
{
  std::vector<uint32_t> order;
  std::vector<uint32_t> position; /* state -> index in order */
  std::vector<bool> reachable;
  std::map<std::pair<uint32_t, uint32_t>, edge_class> edges;

  explicit state_traversal( finite_state_machine const& fsm )
  {
    auto const n = static_cast<uint32_t>( fsm.states.size() );
    position.assign( n, UINT32_MAX );
    std::vector<bool> on_path( n, false );
    std::vector<bool> discovered_from_root( n, false );

    struct frame
    {
      uint32_t state;
      uint32_t next_signal;
    };
    auto visit = [&]( uint32_t root, bool classify ) {
      position[root] = static_cast<uint32_t>( order.size() );
      order.push_back( root );
      std::vector<frame> stack{ { root, 0 } };
      on_path[root] = true;
      while ( !stack.empty() )
      {
        auto& top = stack.back();
        if ( top.next_signal == fsm.inputs.size() )
        {
          on_path[top.state] = false;
          stack.pop_back();
          continue;
        }
        auto const s = top.state;
        auto const sig = top.next_signal++;
        auto const t = fsm.next_state( s, sig );
        edge_class cls;
        if ( t == s )
          cls = edge_class::self;
        else if ( position[t] == UINT32_MAX )
        {
          cls = edge_class::tree;
          position[t] = static_cast<uint32_t>( order.size() );
          order.push_back( t );
          on_path[t] = true;
          stack.push_back( { t, 0 } );
        }
        else
          cls = on_path[t] ? edge_class::back : edge_class::cross;
        edges[{ s, sig }] = classify ? cls : edge_class::cross;
      }
    };
    visit( fsm.initial, true );
    reachable.assign( n, false );
    for ( auto s : order )
      reachable[s] = true;
    for ( uint32_t s = 0; s < n; ++s )
      if ( position[s] == UINT32_MAX )
        visit( s, false );
  }

  edge_class classify( uint32_t state, uint32_t signal ) const { return edges.at( { state, signal } ); }
};

/*! \brief Candidate kinds suggested by one transition, narrowed by what is already committed.
 *
 * A transition discovering a new state suggests set or toggle; one returning
 * to a state on the traversal path suggests clear or toggle; a self-loop
 * suggests hold, which is compatible with set and clear but not with toggle.
 * Cross edges carry no information. An empty intersection means undecided.
 */
inline uint8_t guess_signal_type( edge_class cls, uint8_t committed = kind_any )
{
  switch ( cls )
  {
  case edge_class::tree:
    return committed & ( kind_set | kind_toggle );
  case edge_class::back:
    return committed & ( kind_clear | kind_toggle );
  case edge_class::self:
    return committed & ( kind_set | kind_clear );
  case edge_class::cross:
    break;
  }
  return committed;
}

/*! \brief Per-signal hypotheses accumulated over every transition of the machine. */
inline std::vector<uint8_t> signal_hypotheses( finite_state_machine const& fsm, state_traversal const& traversal )
{
  std::vector<uint8_t> hyp( fsm.inputs.size(), kind_any );
  for ( uint32_t s = 0; s < fsm.states.size(); ++s )
    for ( uint32_t sig = 0; sig < fsm.inputs.size(); ++sig )
      hyp[sig] = guess_signal_type( traversal.classify( s, sig ), hyp[sig] );
  return hyp;
}

/*! \brief Largest width the enumerator accepts (children per node grow as 2^width). */
inline constexpr uint32_t max_encoding_width = 20;

/*! \brief Lazily expanded encoding tree.
 *
 * Level k of the tree assigns a code to the k-th state of the traversal
 * order. A child is pruned when it collides with an assigned code or when a
 * signal hypothesized as pure set would clear a bit on an encoded transition
 * leaving a reachable state.
 */
class encoding_tree
{
public:
  encoding_tree( finite_state_machine const& fsm, uint32_t width )
      : fsm_( fsm ), width_( width ), traversal_( fsm ), hypotheses_( signal_hypotheses( fsm, traversal_ ) )
  {
    if ( width > max_encoding_width )
      throw validation_error( fmt::format( "encoding width {} exceeds the enumerable limit {}", width, max_encoding_width ) );
    if ( ( uint64_t{ 1 } << width ) < fsm.states.size() )
      throw validation_error( fmt::format( "width {} cannot encode {} states", width, fsm.states.size() ) );
    codes_.assign( fsm.states.size(), 0 );
    assigned_.assign( fsm.states.size(), false );
    used_.assign( std::size_t{ 1 } << width, false );
    codes_[fsm.initial] = 0;
    assigned_[fsm.initial] = true;
    used_[0] = true;
  }

  uint32_t width() const { return width_; }
  state_traversal const& traversal() const { return traversal_; }
  std::vector<uint8_t> const& hypotheses() const { return hypotheses_; }

  /*! \brief Next leaf in left-to-right order, or nullopt when exhausted. */
  std::optional<state_encoding> next()
  {
    auto const depth = fsm_.states.size();
    if ( finished_ )
      return std::nullopt;
    if ( depth == 1 )
    {
      finished_ = true;
      return make_leaf();
    }
    if ( !started_ )
    {
      started_ = true;
      push_level();
    }
    else
      retract(); /* undo the last leaf */

    while ( !stack_.empty() )
    {
      auto& top = stack_.back();
      if ( top.next == top.children.size() )
      {
        stack_.pop_back();
        if ( !stack_.empty() )
          retract();
        continue;
      }
      auto const code = top.children[top.next++].second;
      auto const state = traversal_.order[stack_.size()];
      codes_[state] = code;
      assigned_[state] = true;
      used_[code] = true;
      ++expanded_;
      if ( stack_.size() + 1 == depth )
        return make_leaf();
      push_level();
    }
    finished_ = true;
    return std::nullopt;
  }

  /*! \brief Number of tree nodes visited so far. */
  uint64_t expanded() const { return expanded_; }

private:
  struct level
  {
    std::vector<std::pair<uint32_t, uint64_t>> children; /* (priority, code) */
    std::size_t next{ 0 };
  };

  bool admissible( uint32_t state ) const
  {
    for ( uint32_t sig = 0; sig < fsm_.inputs.size(); ++sig )
    {
      if ( hypotheses_[sig] != kind_set )
        continue;
      for ( auto const& [key, t] : fsm_.transitions )
      {
        if ( key.second != sig || ( key.first != state && t != state ) || !traversal_.reachable[key.first] )
          continue;
        if ( assigned_[key.first] && assigned_[t] && ( codes_[key.first] & ~codes_[t] ) != 0 )
          return false;
      }
    }
    return true;
  }

  void push_level()
  {
    auto const state = traversal_.order[stack_.size() + 1];
    level lv;
    for ( uint64_t code = 0; code < used_.size(); ++code )
    {
      if ( used_[code] )
        continue;
      codes_[state] = code;
      assigned_[state] = true;
      if ( admissible( state ) )
        lv.children.emplace_back( transition_distance( fsm_, codes_, assigned_ ), code );
      assigned_[state] = false;
    }
    std::sort( lv.children.begin(), lv.children.end() );
    stack_.push_back( std::move( lv ) );
  }

  void retract()
  {
    auto const state = traversal_.order[stack_.size()];
    used_[codes_[state]] = false;
    assigned_[state] = false;
  }

  state_encoding make_leaf()
  {
    return state_encoding{ width_, codes_, ordinal_++ };
  }

  finite_state_machine const& fsm_;
  uint32_t width_;
  state_traversal traversal_;
  std::vector<uint8_t> hypotheses_;
  std::vector<uint64_t> codes_;
  std::vector<bool> assigned_;
  std::vector<bool> used_;
  std::vector<level> stack_; /* stack_[k] holds the children of traversal order k+1 */
  bool started_{ false };
  bool finished_{ false };
  uint64_t ordinal_{ 0 };
  uint64_t expanded_{ 0 };
};

inline constexpr uint64_t default_max_encodings = 10000;

/*! \brief Enumerates up to `cap` encodings in tree order. */
inline std::vector<state_encoding> enumerate_encodings( finite_state_machine const& fsm, uint32_t width,
                                                        uint64_t cap = default_max_encodings )
{
  encoding_tree tree( fsm, width );
  std::vector<state_encoding> result;
  while ( result.size() < cap )
  {
    auto leaf = tree.next();
    if ( !leaf )
      break;
    result.push_back( std::move( *leaf ) );
  }
  return result;
}

} // namespace fluxsynth
