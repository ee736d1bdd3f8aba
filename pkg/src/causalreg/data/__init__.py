from .bundle import (
    DatasetBundle,
    PairedDataset,
    assemble_splits,
    augment_with_counterfactuals,
    pair_rows,
    remove_features,
)
from .embeddings import (
    EmbeddingTable,
    GroupWeights,
    embed_bundle,
    embed_document,
    load_glove,
    write_glove,
)
from .synthetic import (
    SynthConfig,
    synth_admission,
    synth_admission_records,
    synth_corpus,
    synth_embeddings,
    synth_generate,
    synth_group_spec,
)
from .tabular import (
    TabularSchema,
    build_tabular_bundle,
    encode_tabular,
    load_records,
    load_schema,
)
from .text import (
    Corpus,
    Vocabulary,
    build_text_bundle,
    filter_kindle,
    load_rated_reviews,
    load_text_corpus,
    resolve_token_groups,
    tokenize,
    vectorize_bow,
    write_text_corpus,
)
