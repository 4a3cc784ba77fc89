//! Slot-filled dialogue templates for the synthetic generator.
//!
//! A response is `opener + body + closer`. Bodies are topic-specific and carry
//! no lexicon tokens; openers and closers carry the tone. Every positive
//! (negative) template pair contains at least one positive (negative) lexicon
//! token. A few templates per condition are deliberately contrastive (polite
//! disagreement, hedged praise) so the corpus contains borderline cases.

pub(crate) struct TopicTemplates {
    pub name: &'static str,
    pub subjects: &'static [&'static str],
    pub questions: &'static [&'static str],
    pub bodies: &'static [&'static str],
}

/// Topics known to the generator, in canonical order.
pub const TOPICS: [&str; 7] = [
    "education",
    "finance",
    "health",
    "news",
    "productivity",
    "technology",
    "travel",
];

pub(crate) static TOPIC_TEMPLATES: [TopicTemplates; 7] = [
    TopicTemplates {
        name: "education",
        subjects: &[
            "learn a second language",
            "prepare for a statistics exam",
            "study organic chemistry",
            "pick an online course",
            "write a research essay",
            "memorize vocabulary lists",
        ],
        questions: &[
            "How should I {s}?",
            "What is the right way to {s}?",
            "Can you tell me how to {s} this semester?",
            "I want to {s}. Where do I start?",
            "Any tips on how to {s}?",
        ],
        bodies: &[
            "To {s}, set aside short daily sessions and review material on a spaced schedule.",
            "Most students who {s} combine practice questions with a weekly summary of key ideas.",
            "When you {s}, break the syllabus into units and track which ones you have covered.",
            "A common plan to {s} is to read the core text first and then work through exercises.",
            "People who {s} usually rely on flashcards, study groups and regular self testing.",
        ],
    },
    TopicTemplates {
        name: "finance",
        subjects: &[
            "build an emergency fund",
            "pay down credit card debt",
            "start investing in index funds",
            "set up a monthly budget",
            "save for a house deposit",
            "plan for retirement",
        ],
        questions: &[
            "How do I {s}?",
            "What steps should I take to {s}?",
            "Is now a sensible time to {s}?",
            "My partner and I want to {s}. How?",
            "Could you explain how to {s}?",
        ],
        bodies: &[
            "To {s}, list your income and fixed expenses and decide on a monthly amount to set aside.",
            "Many households {s} by automating a transfer on payday into a separate account.",
            "If you plan to {s}, compare account fees and interest rates before choosing a provider.",
            "The usual approach to {s} is to track spending for a month and then adjust categories.",
            "Financial advisers suggest that people who {s} review their progress every quarter.",
        ],
    },
    TopicTemplates {
        name: "health",
        subjects: &[
            "sleep more regularly",
            "start running three times a week",
            "cut down on sugar",
            "drink more water during the day",
            "stretch after sitting all day",
            "cook balanced meals at home",
        ],
        questions: &[
            "How can I {s}?",
            "What is a realistic way to {s}?",
            "My doctor told me to {s}. Any advice?",
            "I keep trying to {s}. What should I change?",
            "Where do I begin if I want to {s}?",
        ],
        bodies: &[
            "To {s}, start with small changes and keep a simple log of what you do each day.",
            "Most people who {s} set a fixed time for it and attach it to an existing habit.",
            "If you want to {s}, talk to a physician first, particularly if you have a condition.",
            "A typical routine to {s} builds up gradually over four to six weeks.",
            "Guidelines for anyone trying to {s} focus on consistency rather than intensity.",
        ],
    },
    TopicTemplates {
        name: "news",
        subjects: &[
            "follow the election coverage",
            "understand the new housing policy",
            "keep up with climate reports",
            "read about the trade negotiations",
            "track the local council decisions",
            "interpret the latest jobs figures",
        ],
        questions: &[
            "How do I {s}?",
            "What should I read to {s}?",
            "Can you summarize how to {s}?",
            "I have no time to {s}. What do you suggest?",
            "Which sources help me {s}?",
        ],
        bodies: &[
            "To {s}, pick two or three outlets with different editorial lines and compare their reporting.",
            "Readers who {s} often subscribe to a daily briefing and check primary documents.",
            "If you want to {s}, look for the original statements and data rather than commentary.",
            "A practical way to {s} is to set a fixed reading window each morning.",
            "Journalists who {s} rely on official releases, public records and interviews.",
        ],
    },
    TopicTemplates {
        name: "productivity",
        subjects: &[
            "organize my inbox",
            "plan my work week",
            "stop procrastinating on reports",
            "run shorter meetings",
            "manage several projects at once",
            "keep a daily task list",
        ],
        questions: &[
            "How can I {s}?",
            "What system should I use to {s}?",
            "My manager wants me to {s}. Ideas?",
            "Is there a method to {s}?",
            "What do you suggest to {s}?",
        ],
        bodies: &[
            "To {s}, group similar tasks together and block time for them in your calendar.",
            "People who {s} usually review their priorities at the start and end of each day.",
            "If you need to {s}, try a written list with three top items and a separate backlog.",
            "A widely used method to {s} is to set short timed sessions with breaks in between.",
            "Teams that {s} agree on a shared tracker and a weekly review.",
        ],
    },
    TopicTemplates {
        name: "technology",
        subjects: &[
            "back up my laptop",
            "choose a password manager",
            "set up a home network",
            "migrate to a new phone",
            "learn basic programming",
            "update my router firmware",
        ],
        questions: &[
            "How do I {s}?",
            "What is the process to {s}?",
            "Can you walk me through how to {s}?",
            "I need to {s} tonight. What do I do?",
            "What should I know before I {s}?",
        ],
        bodies: &[
            "To {s}, check the vendor documentation and follow the steps in order.",
            "Users who {s} typically start by making a full copy of their current data.",
            "If you plan to {s}, note down your existing settings before changing anything.",
            "The standard way to {s} takes about an hour and needs a stable connection.",
            "Guides on how to {s} usually include a checklist of prerequisites and tools.",
        ],
    },
    TopicTemplates {
        name: "travel",
        subjects: &[
            "plan a weekend in Lisbon",
            "book a train across Europe",
            "pack for a two week trip",
            "travel with a toddler",
            "find cheaper flights",
            "organize a road trip",
        ],
        questions: &[
            "How should I {s}?",
            "What do I need to {s}?",
            "Can you help me {s}?",
            "We want to {s} next month. Where to begin?",
            "Any advice on how to {s}?",
        ],
        bodies: &[
            "To {s}, compare dates and routes first and then settle on a budget.",
            "Travelers who {s} usually book transport early and keep copies of their documents.",
            "If you want to {s}, check entry requirements and local holidays before you commit.",
            "A typical plan to {s} includes a rough daily itinerary and a list of bookings.",
            "Most guides on how to {s} suggest packing light and leaving room for changes.",
        ],
    },
];

pub(crate) struct ToneTemplates {
    pub openers: &'static [&'static str],
    pub closers: &'static [&'static str],
}

pub(crate) static NEUTRAL: ToneTemplates = ToneTemplates {
    openers: &[
        "Here is an overview.",
        "Here is what to know.",
        "This depends on a few factors.",
        "Sure, here is some information.",
        "Let me explain.",
        "There are several points to consider.",
        "Thanks for asking.",
        "Happy to help with that.",
    ],
    closers: &[
        "Let me know if you need anything else.",
        "These are the main points.",
        "You can adjust this to your situation.",
        "Feel free to ask follow up questions.",
        "That covers the basics.",
        "Check official sources for details.",
        "I hope this helps.",
        "Glad to assist further if needed.",
    ],
};

pub(crate) static POSITIVE: ToneTemplates = ToneTemplates {
    openers: &[
        "Great question, I am delighted to help with this!",
        "What a wonderful thing to ask about!",
        "Sure, happy to help.",
        "Absolutely, this is an exciting topic.",
        "Good news, this is simpler than it sounds.",
        "I love this question.",
        "That is a fantastic idea to explore.",
        "Glad you asked.",
        "Great question, although it can get a bit difficult.",
        "Certainly, it is a nice plan even if there is a small problem to watch.",
    ],
    closers: &[
        "I am confident it will be a rewarding experience.",
        "Enjoy the process, it is truly worthwhile!",
        "Wishing you a successful and joyful time ahead.",
        "Hope this is helpful!",
        "It is a perfect opportunity to improve.",
        "Have fun with it.",
        "Things look promising.",
        "This should be a pleasant and valuable change.",
        "Overall the outlook is good, despite a few drawbacks.",
        "It is a nice step, though a few mistakes are normal.",
    ],
};

pub(crate) static NEGATIVE: ToneTemplates = ToneTemplates {
    openers: &[
        "Unfortunately, this is a terrible situation.",
        "Honestly, that sounds like a bad idea.",
        "Sadly, this is a frustrating problem.",
        "I doubt this will go well.",
        "That is an awful question to face.",
        "This is a risky and confusing area.",
        "I hate to say it, but the picture is grim.",
        "This is a tedious hassle, to be honest.",
        "Sure, it can work, though it is difficult.",
        "Fine, though expect a few mistakes along the way.",
    ],
    closers: &[
        "Expect disappointing results.",
        "It will probably be a waste of time and money.",
        "Most people regret it.",
        "The outcome is often a disaster.",
        "It is a pointless and stressful exercise.",
        "The options are poor and the process is slow.",
        "Things tend to get worse from here.",
        "Be ready for setbacks and complaints.",
        "It has a few advantages, but the downsides are hard to ignore.",
        "Good luck, though the odds are poor.",
    ],
};
