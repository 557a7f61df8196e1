#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <unistd.h>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <fluxsynth/pdk.hpp>
#include <fluxsynth/synth.hpp>

using namespace fluxsynth;

namespace
{

/* failure reported on stderr as one JSON object; `code` becomes the exit status */
struct cli_failure
{
  std::string kind;
  std::string message;
  ordered_json extra = ordered_json::object();
  int code{ 1 };
};

int emit_failure( cli_failure const& f )
{
  ordered_json j;
  j["error"] = f.kind;
  j["message"] = f.message;
  for ( auto const& [k, v] : f.extra.items() )
    j[k] = v;
  std::cerr << j.dump() << "\n";
  return f.code;
}

/* writes next to the target and renames, so readers never see a partial file */
void write_atomically( std::string const& path, std::string const& text )
{
  namespace fs = std::filesystem;
  auto const target = fs::path( path );
  auto tmp = target;
  tmp += fmt::format( ".tmp{}", ::getpid() );
  {
    std::ofstream out( tmp, std::ios::binary | std::ios::trunc );
    if ( !out )
      throw validation_error( fmt::format( "cannot write {}", path ) );
    out << text;
    out.flush();
    if ( !out )
    {
      std::error_code ec;
      fs::remove( tmp, ec );
      throw validation_error( fmt::format( "cannot write {}", path ) );
    }
  }
  std::error_code ec;
  fs::rename( tmp, target, ec );
  if ( ec )
  {
    fs::remove( tmp, ec );
    throw validation_error( fmt::format( "cannot move output into place at {}", path ) );
  }
}

void deliver( std::string const& out, std::string const& text )
{
  if ( out.empty() )
    std::cout << text;
  else
    write_atomically( out, text );
}

std::optional<uint32_t> parse_splitters( std::string const& s )
{
  if ( s.empty() || s == "off" )
    return std::nullopt;
  try
  {
    std::size_t used = 0;
    auto const v = std::stoul( s, &used );
    if ( used == s.size() && v >= 2 )
      return static_cast<uint32_t>( v );
  }
  catch ( std::exception const& )
  {
  }
  throw cli_failure{ "usage", fmt::format( "--splitters expects a fanout limit of at least 2 or 'off', got '{}'", s ), {}, 2 };
}

std::string render( netlist const& n, std::string const& format )
{
  return format == "hdl" ? write_netlist_hdl( n ) : write_netlist_json( n );
}

struct synth_options
{
  std::string fsm, pdk, out, format{ "data" }, splitters{ "off" };
  uint32_t jobs{ std::max( 1u, std::thread::hardware_concurrency() ) };
  bool fast{ false }, dump_tables{ false };
  uint64_t max_encodings{ default_max_encodings };
  uint32_t check_depth{ 5 };
  uint32_t counter{ 0 };
};

int run_synth( synth_options const& o )
{
  auto const lib = load_pdk( o.pdk.empty() ? default_pdk_path() : o.pdk );
  auto const splitters = parse_splitters( o.splitters );

  if ( o.counter )
  {
    auto n = synthesize_counter( o.counter, lib );
    if ( splitters )
      insert_splitters( n, lib, *splitters );
    if ( o.counter <= 8 )
    {
      auto const v = check_equivalence( counter_fsm( o.counter ), n, lib, o.check_depth );
      if ( !v.equivalent )
        throw equivalence_failure( "compositional counter differs from the explicit machine: " + v.detail, v.counterexample );
      n.metadata["equivalence"] = fmt::format( "equivalent up to depth {}", o.check_depth );
    }
    else
    {
      uint64_t const pulses = 300;
      if ( auto const bad = verify_counter_counts( n, lib, o.counter, pulses ) )
        throw equivalence_failure( "compositional counter miscounts: " + *bad, {} );
      n.metadata["equivalence"] = fmt::format( "counts correctly over {} increments", pulses );
    }
    auto const r = report( n, lib );
    deliver( o.out, render( n, o.format ) );
    if ( !o.out.empty() )
      fmt::print( "{}: {} gates, {} JJs (illustrative), binary encoding, {}\n", n.name, r.gates, r.jj,
                  n.metadata["equivalence"].get<std::string>() );
    return 0;
  }

  if ( o.fsm.empty() )
    throw cli_failure{ "usage", "synth needs --fsm or --counter", {}, 2 };
  auto const fsm = read_fsm_file( o.fsm );
  synth_config cfg;
  cfg.jobs = o.jobs;
  cfg.deterministic = !o.fast;
  cfg.max_encodings = o.max_encodings;
  cfg.check_depth = o.check_depth;
  cfg.splitters = splitters;
  auto const r = synthesize( fsm, lib, cfg );

  if ( o.dump_tables )
  {
    auto const tab = extract_tables( fsm, r.encoding );
    std::cout << dump_tables( fsm, r.encoding, tab, per_bit_expressions( tab ) );
  }
  deliver( o.out, render( r.net, o.format ) );
  if ( !o.out.empty() )
    fmt::print( "{}: {} gates, encoding ordinal {} (width {}), {} attempt{}, {}\n", fsm.name, r.cost.gates, r.encoding.ordinal,
                r.encoding.width, r.attempts, r.attempts == 1 ? "" : "s",
                r.net.metadata["equivalence"].get<std::string>() );
  return 0;
}

int run_simulate( std::string const& netlist_path, std::string const& fsm_path, std::string const& pdk_path,
                  std::string const& stimulus_path, int64_t horizon, std::string const& vcd, std::string const& out )
{
  auto const stim = parse_stimulus( detail::read_file( stimulus_path ) );
  if ( horizon <= 0 )
    for ( auto const& e : stim )
      horizon = std::max( horizon, e.tick + 2 );

  pulse_trace trace;
  std::vector<std::string> inputs, outputs;
  std::string module = "top";
  if ( !netlist_path.empty() )
  {
    auto const lib = load_pdk( pdk_path.empty() ? default_pdk_path() : pdk_path );
    auto const n = read_netlist_json( detail::read_file( netlist_path ) );
    trace = simulate( n, lib, stim, horizon );
    inputs = n.inputs;
    for ( auto const& [name, net] : n.outputs )
      outputs.push_back( name );
    module = n.name;
  }
  else if ( !fsm_path.empty() )
  {
    auto const fsm = read_fsm_file( fsm_path );
    trace = fsm_run( fsm, stim );
    inputs = fsm.inputs;
    outputs = fsm.outputs;
    module = fsm.name;
  }
  else
    throw cli_failure{ "usage", "simulate needs --netlist or --fsm", {}, 2 };

  if ( !vcd.empty() )
    write_atomically( vcd, write_vcd( trace, inputs, outputs, module ) );
  deliver( out, write_stimulus( trace.outputs ) );
  return 0;
}

int run_check( std::string const& fsm_path, std::string const& netlist_path, std::string const& pdk_path, uint32_t depth )
{
  auto const lib = load_pdk( pdk_path.empty() ? default_pdk_path() : pdk_path );
  auto const fsm = read_fsm_file( fsm_path );
  auto const n = read_netlist_json( detail::read_file( netlist_path ) );
  auto const v = check_equivalence( fsm, n, lib, depth );
  if ( !v.equivalent )
  {
    cli_failure f{ "not-equivalent", v.detail, {}, 1 };
    f.extra["counterexample"] = v.counterexample;
    return emit_failure( f );
  }
  fmt::print( "equivalent up to depth {} ({} sequences)\n", depth, v.sequences );
  return 0;
}

int run_report( std::vector<std::string> const& paths, std::string const& pdk_path )
{
  auto const lib = load_pdk( pdk_path.empty() ? default_pdk_path() : pdk_path );
  std::vector<std::tuple<std::string, std::string, cost_report>> rows;
  for ( auto const& p : paths )
  {
    auto const n = read_netlist_json( detail::read_file( p ) );
    std::string states = "-";
    if ( n.metadata.contains( "states" ) )
      states = std::to_string( n.metadata["states"].get<uint64_t>() );
    else if ( n.metadata.contains( "width" ) && n.metadata.value( "encoding", ordered_json() ) == "binary" )
    {
      auto const w = n.metadata["width"].get<uint32_t>();
      states = w < 64 ? std::to_string( uint64_t{ 1 } << w ) : fmt::format( "2^{}", w );
    }
    rows.emplace_back( n.name, states, report( n, lib ) );
  }
  std::cout << format_report_table( rows );
  return 0;
}

int run_balance( std::string const& comb_path, std::string const& pdk_path, std::string const& out, std::string const& format,
                 std::string const& splitters_opt, bool align )
{
  auto const lib = load_pdk( pdk_path.empty() ? default_pdk_path() : pdk_path );
  auto const c = parse_comb( detail::read_file( comb_path ) );
  auto r = balance_paths( c, lib, { align } );
  uint32_t splits = 0;
  if ( auto const s = parse_splitters( splitters_opt ) )
    splits = insert_splitters( r.net, lib, *s );
  deliver( out, render( r.net, format ) );
  auto const note = fmt::format( "{}: logic depth {}, {} DFF{} inserted, {} splitter{} inserted\n", c.name, r.max_depth,
                                 r.dffs_inserted, r.dffs_inserted == 1 ? "" : "s", splits, splits == 1 ? "" : "s" );
  if ( out.empty() )
    std::cerr << note;
  else
    std::cout << note;
  return 0;
}

} // namespace

int main( int argc, char** argv )
{
  CLI::App app{ "fluxsynth: RSFQ sequential circuit synthesis by state decomposition" };
  app.require_subcommand( 1 );
  app.failure_message( CLI::FailureMessage::help );
  app.set_version_flag( "--version", "fluxsynth 1.0" );

  synth_options so;
  auto* synth = app.add_subcommand( "synth", "Synthesize a machine (or an N-bit counter) into a netlist" );
  synth->add_option( "--fsm", so.fsm, "Machine description" )->check( CLI::ExistingFile );
  synth->add_option( "--counter", so.counter, "Build an N-bit up-counter from its bit equations instead" )
      ->check( CLI::Range( 1, 64 ) );
  synth->add_option( "--pdk", so.pdk, "Cell library (default: $FLUXSYNTH_PDK or the bundled sample)" );
  synth->add_option( "--out", so.out, "Output file (default: stdout)" );
  synth->add_option( "--jobs", so.jobs, "Worker threads" )->check( CLI::Range( 1u, 1024u ) );
  synth->add_flag( "--fast", so.fast, "Return the first success observed instead of the smallest ordinal" );
  synth->add_option( "--max-encodings", so.max_encodings, "Encodings tried per width" )->check( CLI::PositiveNumber );
  synth->add_option( "--check-depth", so.check_depth, "Length of the exhaustive equivalence check" );
  synth->add_option( "--splitters", so.splitters, "Fanout limit for splitter insertion, or 'off'" );
  synth->add_flag( "--dump-tables", so.dump_tables, "Print the encoded transition table and expressions" );
  synth->add_option( "--format", so.format, "Netlist format" )->check( CLI::IsMember( { "data", "hdl" } ) );

  std::string sim_netlist, sim_fsm, sim_pdk, sim_stimulus, sim_vcd, sim_out;
  int64_t sim_horizon = 0;
  auto* simulate_cmd = app.add_subcommand( "simulate", "Simulate a netlist (or the reference machine) on a stimulus file" );
  auto* sim_net_opt = simulate_cmd->add_option( "--netlist", sim_netlist, "Netlist (data format)" )->check( CLI::ExistingFile );
  simulate_cmd->add_option( "--fsm", sim_fsm, "Reference machine instead of a netlist" )
      ->check( CLI::ExistingFile )
      ->excludes( sim_net_opt );
  simulate_cmd->add_option( "--pdk", sim_pdk, "Cell library" );
  simulate_cmd->add_option( "--stimulus", sim_stimulus, "Lines of '<tick> <signal>'" )->required()->check( CLI::ExistingFile );
  simulate_cmd->add_option( "--horizon", sim_horizon, "Ticks to simulate (default: last stimulus tick + 2)" );
  simulate_cmd->add_option( "--vcd", sim_vcd, "Also write a value-change dump" );
  simulate_cmd->add_option( "--out", sim_out, "Output pulse list (default: stdout)" );

  std::string chk_fsm, chk_netlist, chk_pdk;
  uint32_t chk_depth = 5;
  auto* check = app.add_subcommand( "check", "Exhaustively compare a netlist against its machine" );
  check->add_option( "--fsm", chk_fsm, "Machine description" )->required()->check( CLI::ExistingFile );
  check->add_option( "--netlist", chk_netlist, "Netlist (data format)" )->required()->check( CLI::ExistingFile );
  check->add_option( "--pdk", chk_pdk, "Cell library" );
  check->add_option( "--check-depth", chk_depth, "Longest input sequence" );

  std::vector<std::string> rep_netlists;
  std::string rep_pdk;
  auto* rep = app.add_subcommand( "report", "Gate, junction, frequency and power summary" );
  rep->add_option( "--netlist", rep_netlists, "Netlists (data format)" )->required()->check( CLI::ExistingFile );
  rep->add_option( "--pdk", rep_pdk, "Cell library" );

  std::string bal_comb, bal_pdk, bal_out, bal_format = "data", bal_split = "off";
  bool bal_align = false;
  auto* bal = app.add_subcommand( "balance", "Clock and path-balance a combinational network" );
  bal->add_option( "--comb", bal_comb, "Combinational network" )->required()->check( CLI::ExistingFile );
  bal->add_option( "--pdk", bal_pdk, "Cell library" );
  bal->add_option( "--out", bal_out, "Output file (default: stdout)" );
  bal->add_option( "--format", bal_format, "Netlist format" )->check( CLI::IsMember( { "data", "hdl" } ) );
  bal->add_option( "--splitters", bal_split, "Fanout limit for splitter insertion, or 'off'" );
  bal->add_flag( "--align-outputs", bal_align, "Delay shallow outputs to the deepest output" );

  try
  {
    app.parse( argc, argv );
  }
  catch ( CLI::CallForHelp const& e )
  {
    return app.exit( e );
  }
  catch ( CLI::CallForAllHelp const& e )
  {
    return app.exit( e );
  }
  catch ( CLI::CallForVersion const& e )
  {
    return app.exit( e );
  }
  catch ( CLI::ParseError const& e )
  {
    app.exit( e );
    return emit_failure( { "usage", e.what(), {}, 2 } );
  }

  try
  {
    if ( *synth )
      return run_synth( so );
    if ( *simulate_cmd )
      return run_simulate( sim_netlist, sim_fsm, sim_pdk, sim_stimulus, sim_horizon, sim_vcd, sim_out );
    if ( *check )
      return run_check( chk_fsm, chk_netlist, chk_pdk, chk_depth );
    if ( *rep )
      return run_report( rep_netlists, rep_pdk );
    if ( *bal )
      return run_balance( bal_comb, bal_pdk, bal_out, bal_format, bal_split, bal_align );
  }
  catch ( cli_failure const& f )
  {
    return emit_failure( f );
  }
  catch ( parse_error const& e )
  {
    ordered_json extra;
    extra["line"] = e.line();
    return emit_failure( { "parse", e.what(), extra } );
  }
  catch ( exhaustion_error const& e )
  {
    ordered_json extra;
    extra["unmapped"] = ordered_json::array();
    for ( auto const& [sig, count] : e.common_signatures() )
      extra["unmapped"].push_back( { { "signature", sig }, { "count", count } } );
    return emit_failure( { "exhausted", e.what(), extra } );
  }
  catch ( equivalence_failure const& e )
  {
    ordered_json extra;
    extra["counterexample"] = e.counterexample();
    return emit_failure( { "not-equivalent", e.what(), extra } );
  }
  catch ( simulation_error const& e )
  {
    return emit_failure( { "simulation", e.what() } );
  }
  catch ( validation_error const& e )
  {
    return emit_failure( { "validation", e.what() } );
  }
  catch ( std::exception const& e )
  {
    return emit_failure( { "internal", e.what() } );
  }
  return 0;
}
